use alloc::boxed::Box;
use alloc::string::String;

/// Errors produced by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Index(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("capacity exceeded: requested {requested}, only {available} available")]
    Capacity { requested: String, available: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("numerical failure at period {period}: {message}")]
    NumericalAt { period: usize, message: String },
    #[error("ECM iteration {iteration}: {source}")]
    Ecm { iteration: usize, source: Box<Error> },
    #[error("estimation window ending at period {period}: {source}")]
    Window { period: usize, source: Box<Error> },
    #[error("all {0} candidates failed to evaluate")]
    AllCandidatesFailed(usize),
    #[error("all {0} deletion patterns failed to evaluate")]
    AllPatternsFailed(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
