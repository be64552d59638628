use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The instance violates a structural requirement.
    #[error("invalid instance: {0}")]
    Model(String),
    /// An operation was called outside its documented domain.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("state budget of {budget} exceeded while {during}")]
    Capacity { budget: usize, during: &'static str },
    /// Something that the construction guarantees did not hold.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
