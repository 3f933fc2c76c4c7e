use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the ranking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("index {index} out of range (extent {extent})")]
    Index { index: usize, extent: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("incompatible artifact: {0}")]
    Compatibility(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
