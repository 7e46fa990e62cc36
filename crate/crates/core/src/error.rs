use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Bad or inconsistent configuration, e.g. a column that does not exist.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that cannot be used as-is.
    #[error("data error: {0}")]
    Data(String),

    #[error("index {index} out of range for {len} rows")]
    Index { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The optimizer hit its iteration cap.
    #[error("numerical error: no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Regimes could not be identified from a sweep.
    #[error("regime detection: {0}")]
    Regime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
