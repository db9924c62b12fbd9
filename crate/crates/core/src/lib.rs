//! Finite element simulator for heat-conducting, incompressible,
//! non-Newtonian flow in 2D.
//!
//! The discrete scheme is backward Euler in time with Taylor-Hood (P2/P1)
//! velocity-pressure elements and P1 temperature, skew-symmetric convection
//! forms, an optional zeroth-order velocity penalty, and a decoupled damped
//! fixed-point solve per step. On top of the solver sit runnable diagnostics
//! for the energy identity, entropy production, temperature positivity, and
//! the relative energy between two trajectories, plus manufactured-solution
//! convergence studies.

pub mod assembly;
pub mod config;
pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod infsup;
pub mod linsolve;
pub mod mesh;
pub mod mms;
pub mod output;
pub mod quadrature;
pub mod scenario;
pub mod space;
pub mod stepper;

pub use error::{Error, Result};
