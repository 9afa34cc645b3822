use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("line {line}: {reason}")]
    Standoff { line: usize, reason: String },

    #[error("conll: {0}")]
    Conll(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("labels: {0}")]
    Labels(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("model file: {0}")]
    Format(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("schema fingerprint mismatch: bundle has {found}, schema has {expected}")]
    Fingerprint { found: String, expected: String },

    #[error("bundle is missing the {0} component")]
    MissingComponent(&'static str),

    #[error("service: {0}")]
    Service(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
