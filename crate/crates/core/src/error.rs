use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {reason}")]
    ParameterDomain { name: &'static str, reason: String },

    #[error("mean is undefined for this distribution: {0}")]
    UndefinedMean(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("item index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("scorer misuse: {0}")]
    Misuse(String),

    #[error("degenerate parameter: {0}")]
    Degenerate(String),

    #[error("vacuous bound: {0}")]
    VacuousBound(String),

    #[error("zero gap between qualities {0} and {1}")]
    ZeroGap(f64, f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::ParameterDomain {
        name,
        reason: reason.into(),
    }
}
