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
    #[error("empty corpus")]
    EmptyCorpus,
    /// Record indices are 1-based, matching line numbers in JSONL input.
    #[error("dimension mismatch at record {index}: expected {expected}, found {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite vector component at record {index}")]
    NonFinite { index: usize },
    #[error("duplicate id {id:?} at record {index}")]
    DuplicateId { index: usize, id: String },
    #[error("malformed record {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no non-outlier documents")]
    NoClusteredDocuments,
    #[error("coherence undefined")]
    CoherenceUndefined,
    #[error("cholesky factorization failed (jitter up to {jitter:e})")]
    Cholesky { jitter: f64 },
    #[error("objective failed on every trial")]
    AllTrialsFailed,
    #[error("invalid profile table: {0}")]
    Table(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
