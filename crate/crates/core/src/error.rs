//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative or direct numerical procedure failed.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// Inconsistent problem or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Cache file is malformed or incompatible with the request.
    #[error("cache error: {0}")]
    Cache(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
