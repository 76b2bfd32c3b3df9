use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Configuration rejected; `key` is the dotted path of the offending entry.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Input data violates a contract (bad record, empty corpus, mixed partitions).
    #[error("data error: {0}")]
    Data(String),

    /// Arithmetic precondition violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("signature seed mismatch: {left:016x} vs {right:016x}")]
    SeedMismatch { left: u64, right: u64 },

    #[error("stage `{stage}` output digest does not match the manifest; rerun with --force")]
    DigestMismatch { stage: String },

    #[error("missing stats for stage `{0}`")]
    MissingStage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 resume digest mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::DigestMismatch { .. } => 4,
            _ => 3,
        }
    }
}
