//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or axiom-violating input data.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An operation's mathematical precondition does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A brute-force search space exceeded its configured guard.
    #[error("search guard exceeded: {0}")]
    GuardExceeded(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Error {
        Error::Invalid(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Error {
        Error::Precondition(msg.into())
    }

    pub fn guard(msg: impl Into<String>) -> Error {
        Error::GuardExceeded(msg.into())
    }
}
