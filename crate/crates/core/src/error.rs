use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violates a documented precondition.
    InvalidInput(String),
    /// A query falls outside the domain where the model is defined.
    OutOfDomain(String),
    /// A distance collapsed to zero in a 1/r^n law.
    Singularity(String),
    /// A solver or integrator failed to produce a usable result.
    NumericalFailure {
        message: String,
        condition_estimate: Option<f64>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::OutOfDomain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            condition_estimate: None,
        }
    }

    /// True for errors caused by inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::OutOfDomain(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::OutOfDomain(m) => write!(f, "out of domain: {m}"),
            Error::Singularity(m) => write!(f, "singularity: {m}"),
            Error::NumericalFailure {
                message,
                condition_estimate: Some(c),
            } => write!(f, "numerical failure: {message} (condition estimate {c:.3e})"),
            Error::NumericalFailure { message, .. } => write!(f, "numerical failure: {message}"),
        }
    }
}

impl core::error::Error for Error {}
