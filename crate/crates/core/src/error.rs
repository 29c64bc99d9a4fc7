use std::path::PathBuf;

use thiserror::Error;

/// Which leg of the transmission path failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    User,
    Sns,
}

impl std::fmt::Display for Hop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hop::User => f.write_str("user"),
            Hop::Sns => f.write_str("sns"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("channel-count error: expected 3 channels, got {0}")]
    Channels(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed {format} input: {reason}")]
    Parse { format: &'static str, reason: String },

    #[error("jpeg {hop} hop failed: {reason}")]
    Channel { hop: Hop, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Parse {
            format,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
