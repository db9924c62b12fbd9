use std::fmt;

/// Error type shared by all solver components.
#[derive(Debug, Clone)]
pub enum Error {
    /// A precondition on user-supplied data was violated (bad mesh sizes,
    /// out-of-range exponents, malformed config, ...). Exit code 1 territory.
    InvalidInput(String),
    /// The outer fixed-point iteration did not reach the requested tolerance.
    PicardDiverged {
        step: usize,
        iters: usize,
        residual: f64,
    },
    /// Sparse factorization or triangular solve failed.
    LinearSolveFailed(String),
    /// The dense eigensolver failed (inf-sup test).
    EigenSolveFailed(String),
    /// A temperature iterate lost nodal positivity; upstream failure.
    PositivityLost { node: usize, value: f64 },
    /// Scalar root finder did not converge (regularized viscoplastic law).
    RootFindFailed(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::PicardDiverged {
                step,
                iters,
                residual,
            } => write!(
                f,
                "fixed-point iteration diverged at step {step}: residual {residual:.3e} after {iters} iterations"
            ),
            Error::LinearSolveFailed(msg) => write!(f, "linear solve failed: {msg}"),
            Error::EigenSolveFailed(msg) => write!(f, "eigensolve failed: {msg}"),
            Error::PositivityLost { node, value } => write!(
                f,
                "temperature positivity lost at node {node}: value {value:.3e}"
            ),
            Error::RootFindFailed(msg) => write!(f, "root finder failed: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
