use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown identity {0}")]
    UnknownIdentity(u32),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient pool: {0}")]
    InsufficientPool(String),

    #[error("unsatisfiable configuration: {0}")]
    Unsatisfiable(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported model format: {0}")]
    Format(String),

    #[error("non-finite loss at iteration {iteration} (batch {batch})")]
    NonFiniteLoss { iteration: usize, batch: usize },

    #[error("detections span several frames ({first} and {other})")]
    MixedFrames { first: u32, other: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. } | Error::NonFinite(_))
    }
}
