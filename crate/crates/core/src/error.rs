use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} = {value} is out of range: {bound}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        bound: &'static str,
    },

    #[error("v1 must exceed v2 (v1 = {v1}, v2 = {v2})")]
    OrderingViolation { v1: f64, v2: f64 },

    #[error("operation requires {expected} but parameters are in {actual}")]
    WrongCase {
        expected: crate::model::CaseLabel,
        actual: crate::model::CaseLabel,
    },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported output format `{0}`")]
    UnsupportedFormat(String),

    #[error("malformed document: {0}")]
    Parse(String),
}

impl Error {
    /// Name of the offending field for range errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::OutOfRange { field, .. } => Some(field),
            Error::OrderingViolation { .. } => Some("v1"),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
