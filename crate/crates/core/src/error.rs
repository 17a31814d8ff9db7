//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("entry ({row}, {col}) out of bounds for dimension {n}")]
    EntryOutOfBounds { row: usize, col: usize, n: usize },

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("zero diagonal at row {row}")]
    ZeroDiagonal { row: usize },

    #[error("{context}: vector is zero")]
    ZeroVector { context: &'static str },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dense path refused: n = {n} exceeds cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("all samples in the batch are degenerate (near-zero prediction)")]
    AllDegenerateBatch,

    #[error("{path}: {reason}")]
    MalformedInput { path: String, reason: String },

    #[error("checksum mismatch for {path}")]
    ChecksumMismatch { path: String },

    #[error("stored right-hand side disagrees with A*x for {path}")]
    InconsistentSample { path: String },

    #[error("configuration error: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MalformedInput {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
