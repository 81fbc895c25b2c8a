use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the multiscale pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("IPDG form is not coercive ({0}); increase the penalty parameter")]
    Coercivity(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("non-positive coefficient {value} at cell {cell}")]
    NonPositiveCoefficient { cell: usize, value: f64 },

    #[error("malformed raster {path}: {reason}")]
    MalformedRaster { path: PathBuf, reason: String },

    #[error("basis error: {0}")]
    Basis(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Configuration errors map to CLI exit code 2, everything else to 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            Error::Config { .. } | Error::MalformedRaster { .. } | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
