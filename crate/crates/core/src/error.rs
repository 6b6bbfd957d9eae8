//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate document name in batch: {0}")]
    DuplicateName(String),

    #[error("future timestamp: ts={requested} is beyond clock={clock}")]
    FutureTimestamp { requested: u64, clock: u64 },

    #[error("batch timestamp out of order: got {got}, expected {expected}")]
    OutOfOrderBatch { got: u64, expected: u64 },

    #[error("invalid batch delta: {0}")]
    InvalidDelta(String),

    #[error("unknown pid: {0}")]
    UnknownPid(String),

    #[error("verification failed: stored hash {stored}, recomputed {computed}")]
    VerificationFailed { stored: String, computed: String },

    #[error("ambiguous tie structure: {candidates} candidate pairs exceed the limit of {limit}")]
    AmbiguousTieStructure { candidates: usize, limit: usize },

    #[error("corrupt store: {file}:{line}: {reason}")]
    CorruptStore {
        file: String,
        line: u64,
        reason: String,
    },

    #[error("store verification failed: {0}")]
    InvariantViolation(String),

    #[error("empty query set")]
    EmptyQuerySet,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for a [`Error::CorruptStore`] with a 1-based line number.
    pub fn corrupt(file: impl Into<String>, line: u64, reason: impl Into<String>) -> Self {
        Error::CorruptStore {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}
