use thiserror::Error;

/// Errors produced by the library.
///
/// The variants map onto the CLI exit-code policy: `InvalidInput` is a usage
/// problem, `Unsupported` asks the caller to fall back to another route, and
/// `Domain` / `HorizonTooSmall` report that the requested quantity cannot be
/// resolved with the configured lattice horizon or function domain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
