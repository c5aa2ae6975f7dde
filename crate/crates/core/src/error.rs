use thiserror::Error;

/// Errors produced by the library and surfaced by the CLI with distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied incompatible or invalid arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// An iterative method did not reach its tolerance. `best` is the best
    /// estimate available when iteration stopped.
    #[error("numerical failure in {what}: {detail} (best estimate {best:e})")]
    Numerical {
        what: &'static str,
        detail: String,
        best: f64,
    },

    /// Malformed instance document.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Well-formed document that violates a domain invariant.
    #[error("validation error in {field}: {invariant}")]
    Validation { field: String, invariant: String },

    /// The requested random profile cannot be realized at the requested size.
    #[error("generation error: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, invariant: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            invariant: invariant.into(),
        }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            _ => 2,
        }
    }
}
