use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two inputs that must agree (for example a grid and its coefficients) do not.
    #[error("usage error: {0}")]
    Usage(String),
    /// A user-supplied utility does not satisfy the monotonicity/concavity requirements.
    #[error("invalid utility specification: {0}")]
    InvalidSpec(String),
    /// Reading an input file failed.
    #[error("i/o error: {0}")]
    Io(String),
    /// An iterative method failed to produce a finite answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
