use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or shape precondition violation.
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// Mode index outside 0..order.
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    /// Materialization would exceed the in-memory element cap.
    #[error("memory cap exceeded: {0}")]
    CapExceeded(String),
    /// Numerical failure or infeasibility.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
