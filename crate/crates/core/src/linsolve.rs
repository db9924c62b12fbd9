//! Thin wrappers around the sparse direct solvers.
//!
//! Everything runs sequentially so that repeated runs with identical inputs
//! produce bit-identical results.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::Once;

static INIT: Once = Once::new();

pub(crate) fn init_sequential() {
    INIT.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Triplet accumulator for a sparse matrix; duplicate entries are summed.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        TripletMatrix {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push(Triplet::new(row, col, value));
    }

    pub fn build(&self) -> Result<SparseColMat<usize, f64>> {
        init_sequential();
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &self.entries)
            .map_err(|e| Error::LinearSolveFailed(format!("matrix assembly: {e:?}")))
    }

    /// y += scale * A x
    pub fn accumulate_matvec(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        for t in &self.entries {
            y[t.row] += scale * t.val * x[t.col];
        }
    }
}

pub struct LuFactors {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

/// Holds the symbolic LU analysis so repeated factorizations of matrices
/// with one fixed sparsity pattern (Picard iterations, time steps) skip the
/// ordering stage. Never share a cache between different patterns.
#[derive(Default)]
pub struct LuSolveCache {
    symbolic: Option<faer::sparse::linalg::solvers::SymbolicLu<usize>>,
}

impl LuFactors {
    pub fn factor(matrix: &SparseColMat<usize, f64>) -> Result<Self> {
        init_sequential();
        let n = matrix.nrows();
        let lu = matrix
            .sp_lu()
            .map_err(|e| Error::LinearSolveFailed(format!("sparse LU: {e:?}")))?;
        Ok(LuFactors { lu, n })
    }

    pub fn factor_cached(matrix: &SparseColMat<usize, f64>, cache: &mut LuSolveCache) -> Result<Self> {
        init_sequential();
        let n = matrix.nrows();
        let symbolic = match &cache.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = faer::sparse::linalg::solvers::SymbolicLu::try_new(matrix.symbolic())
                    .map_err(|e| Error::LinearSolveFailed(format!("symbolic LU: {e:?}")))?;
                cache.symbolic = Some(s.clone());
                s
            }
        };
        let lu = faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(symbolic, matrix.as_ref())
            .map_err(|e| Error::LinearSolveFailed(format!("numeric LU: {e:?}")))?;
        Ok(LuFactors { lu, n })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = faer::Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

pub struct CholeskyFactors {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl CholeskyFactors {
    pub fn factor(matrix: &SparseColMat<usize, f64>) -> Result<Self> {
        init_sequential();
        let n = matrix.nrows();
        let llt = matrix
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::LinearSolveFailed(format!("sparse Cholesky: {e:?}")))?;
        Ok(CholeskyFactors { llt, n })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = faer::Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_nonsymmetric_system() {
        let mut m = TripletMatrix::new(2, 2);
        m.push(0, 0, 2.0);
        m.push(0, 1, 1.0);
        m.push(1, 0, 0.5);
        m.push(1, 1, 3.0);
        // duplicate accumulation
        m.push(1, 1, 1.0);
        let lu = LuFactors::factor(&m.build().unwrap()).unwrap();
        let x = lu.solve(&[3.0, 4.5]);
        // A = [[2,1],[0.5,4]], b = [3,4.5] -> x = [1,1]
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let mut m = TripletMatrix::new(2, 2);
        m.push(0, 0, 4.0);
        m.push(0, 1, 1.0);
        m.push(1, 0, 1.0);
        m.push(1, 1, 3.0);
        let ch = CholeskyFactors::factor(&m.build().unwrap()).unwrap();
        let x = ch.solve(&[5.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }
}
