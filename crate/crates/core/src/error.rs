use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("frame index {tau} does not follow {last}")]
    FrameOrder { tau: u32, last: u32 },

    #[error("distance query on an empty point set")]
    EmptySet,

    #[error("breakthrough node {0} is not reachable from any source")]
    Unreachable(u32),

    #[error("no front reaches the outlet region")]
    NoBreakthrough,

    #[error("layout requires a non-empty main channel")]
    EmptyChannel,

    #[error("bundle verification failed: {0}")]
    Bundle(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
