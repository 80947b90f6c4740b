use thiserror::Error;

/// Errors raised by the core arithmetic and scheme operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("decode error: {0}")]
    Decode(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unsupported degree: {degree} exceeds the supported maximum {max}")]
    UnsupportedDegree { degree: usize, max: usize },
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("randomness source failure: {0}")]
    Randomness(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
