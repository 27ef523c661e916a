use thiserror::Error;

/// Errors raised by stream handling, optimization and experiment setup.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-contiguous batch: expected time step {expected}, got {actual}")]
    NonContiguousBatch { expected: usize, actual: usize },

    #[error("cannot {0} on an empty collection")]
    Empty(&'static str),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("invalid stream definition: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("csv input {path}: {reason}")]
    Csv { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
