use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("generation exhausted after {rejects} rejected draws")]
    GenerationExhausted { rejects: usize },

    #[error("sequence {index}: {source}")]
    Sequence {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("validation failed for {path}: {message}")]
    Validation { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad data on disk rather than bad arguments.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Format { .. } | Error::InvalidInput(_)
        )
    }

    /// True for sampling / factorization failures.
    pub fn is_generation(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::GenerationExhausted { .. } => true,
            Error::Sequence { source, .. } => source.is_generation(),
            _ => false,
        }
    }
}
