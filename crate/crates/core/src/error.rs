use std::path::PathBuf;

use crate::model::Channel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("tube is empty")]
    EmptyTube,

    #[error("tube is not contiguous: expected frame {expected}, found {found}")]
    NonContiguousTube { expected: u32, found: u32 },

    #[error("tubes belong to different videos ({0} vs {1})")]
    VideoMismatch(String, String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("missing feature channel {0}")]
    MissingChannel(Channel),

    #[error("proposal lies outside the score volume: {0}")]
    OutOfExtent(String),

    #[error("cost matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("cost matrix contains a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("infeasible selection: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Record {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
