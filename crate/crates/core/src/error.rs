use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (width mismatch, zero secret, bad slot, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// The request is well formed but too large to evaluate exactly.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A cost or gradient evaluated to NaN or infinity.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An internal invariant was broken; indicates a bug.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
