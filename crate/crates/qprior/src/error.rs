//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide error type. `Config` covers invalid parameters and malformed
/// configuration; `Format` covers violations of the on-disk file contracts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("map parse error at line {line}, column {col}: {msg}")]
    MapParse {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("correctness is undefined: identified - false_positives + false_negatives is zero")]
    UndefinedCorrectness,

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
