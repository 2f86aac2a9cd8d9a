use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The arrival rate evaluates negative somewhere on the validation grid.
    #[error("arrival rate is negative ({value}) at t = {time}")]
    NegativeRate { time: f64, value: f64 },
    /// A closed form was requested outside the parameter regime it holds in.
    #[error("regime violation: {0}")]
    Regime(String),
    /// A logarithm or power would be taken of a non-positive quantity.
    #[error("domain error: {0}")]
    Domain(String),
    /// Integration or truncation did not reach the requested accuracy.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The requested stationary law does not exist.
    #[error("unstable system: {0}")]
    Unstable(String),
}

pub type Result<T> = core::result::Result<T, Error>;
