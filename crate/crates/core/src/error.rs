//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate direction: {0}")]
    Degenerate(String),

    #[error("enumeration budget exceeded: estimated {estimated:.3e} points against a budget of {budget}")]
    Capacity { estimated: f64, budget: u64 },

    #[error("degenerate code: {0}")]
    DegenerateCode(String),

    #[error("message index {index} out of range for a code of size {size}")]
    Index { index: usize, size: usize },

    #[error("lattice structure error: {0}")]
    Structure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("power budget violated: {0}")]
    Power(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by an enumeration or search budget, at any
    /// nesting depth.
    pub fn is_capacity(&self) -> bool {
        match self {
            Error::Capacity { .. } => true,
            Error::Trial { source, .. } => source.is_capacity(),
            _ => false,
        }
    }

    /// True for errors caused by malformed or inconsistent configuration.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Parameter(_) => true,
            Error::Trial { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
