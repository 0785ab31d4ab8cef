use thiserror::Error;

use crate::kriging::RankReport;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular design: {} null direction(s); removable rows {:?}", .0.null_vectors.len(), .0.removable)]
    SingularDesign(Box<RankReport>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("operation requires an additive kernel")]
    UnsupportedStructure,

    #[error("underdetermined: {0}")]
    Underdetermined(String),

    #[error("hyperparameter fit failed: {0}")]
    FitFailure(String),

    #[error("target {0} cannot be reached with positive coefficients")]
    UnattainableTarget(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical kind (singular Gram, failed fits).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign(_) | Error::Numerical(_) | Error::FitFailure(_)
        )
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
