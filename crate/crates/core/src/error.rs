use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Density or potential evaluated where it is not finite.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation's precondition does not hold for the given instance.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A bracketing or search procedure ran out of steps.
    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
