use thiserror::Error;

/// Errors raised by the library. Variants fall into three families that the
/// CLI maps onto exit codes: bad input, failed checks, and resource caps.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("point lies on the curve (distance {distance:e})")]
    OnBoundary { distance: f64 },

    #[error("degenerate samples: {0}")]
    Degenerate(String),

    #[error("vertical check failed at samples {a} and {b}: {reason}")]
    NotVertical { a: usize, b: usize, reason: String },

    #[error("patchwork: node {node} (generation {generation}) {reason}")]
    Patchwork { node: usize, generation: usize, reason: String },

    #[error("fiber tracer stopped: {reason} (last good point {last_good:?})")]
    Tracer { reason: String, last_good: Vec<f64> },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("check failed: {0}")]
    Check(String),

    #[error("resource cap: {what} needs {requested}, cap is {cap}")]
    ResourceCap { what: String, requested: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Assertion,
    Resource,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Check(_) | Error::NotVertical { .. } | Error::Undefined(_) => ErrorKind::Assertion,
            Error::Tracer { .. } | Error::Patchwork { .. } => ErrorKind::Assertion,
            Error::ResourceCap { .. } => ErrorKind::Resource,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
