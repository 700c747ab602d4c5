use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed row in a tabular input. `row` is the 1-based line number.
    #[error("{source_name}: row {row}: {message}")]
    Ingest {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("duplicate song id `{0}`")]
    DuplicateSongId(String),

    #[error("invalid audio features: {0}")]
    InvalidAudio(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("inference unavailable: {0}")]
    InferenceUnavailable(String),

    #[error("split audit violation: {0}")]
    Audit(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn ingest(source_name: impl Into<String>, row: usize, message: impl Into<String>) -> Self {
        Error::Ingest {
            source_name: source_name.into(),
            row,
            message: message.into(),
        }
    }
}
