use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, divergence and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: length mismatches, out-of-range indices, bad shapes.
    #[error("invalid input: {0}")]
    Input(String),

    /// A parameter outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature or recursion failed to reach its tolerance.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An iterative optimizer diverged.
    #[error("optimization failure: {0}")]
    Optimization(String),

    /// Experiment configuration rejected.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Context wrapper used by the harness to tag failures with (n, replication).
    #[error("n={n}, replication={rep}: {source}")]
    Replication {
        n: u64,
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures caused by invalid user input or configuration.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Input(_) | Error::Domain(_) | Error::Config(_) => true,
            Error::Replication { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    /// True for quadrature / optimizer failures.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Optimization(_) => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
