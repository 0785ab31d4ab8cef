//! Cholesky factorization with an adaptive diagonal jitter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl CholeskyFactor {
    /// Factorize a symmetric matrix. On failure, retry with jitter starting at
    /// `1e-10·trace/n` and growing tenfold up to `1e-6·trace/n`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 {
            return Ok(CholeskyFactor {
                chol: Cholesky::new(DMatrix::zeros(0, 0)).expect("empty matrix"),
                jitter: 0.0,
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }
        if let Some(chol) = Cholesky::new(matrix.clone()) {
            return Ok(CholeskyFactor { chol, jitter: 0.0 });
        }
        let scale = matrix.trace() / n as f64;
        let mut rel = JITTER_START;
        while rel <= JITTER_MAX * (1.0 + 1e-12) {
            let jitter = rel * scale;
            let mut m = matrix.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                return Ok(CholeskyFactor { chol, jitter });
            }
            rel *= 10.0;
        }
        Err(Error::Numerical(format!(
            "Cholesky factorization failed with jitter up to {:.1e}",
            JITTER_MAX * scale
        )))
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Diagonal jitter that was added (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `L⁻¹ b`
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// `bᵀ A⁻¹ b`
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        self.solve_lower(b).norm_squared()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}
