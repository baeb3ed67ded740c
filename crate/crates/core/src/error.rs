//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the detection pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("feature vector must have at least one component")]
    EmptyVector,

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("cannot normalize a vector with L2 norm {norm:e} (threshold 1e-30)")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input collection is empty")]
    EmptyInput,

    #[error("memory bank is empty")]
    EmptyBank,

    #[error("k must be at least 1")]
    InvalidK,

    #[error("invalid scale {scale}: {reason}")]
    InvalidScale { scale: f64, reason: &'static str },

    #[error("neighbor list is empty")]
    EmptyNeighbors,

    #[error("neighbor at position {index} carries no distribution label")]
    MissingLabel { index: usize },

    #[error("score list is empty")]
    EmptyScores,

    #[error("tpr target {target} is outside (0, 1]")]
    InvalidTarget { target: f64 },

    #[error("standard deviation must be positive, got {std}")]
    NonPositiveStd { std: f64 },

    #[error("dataset '{name}' is empty")]
    EmptyDataset { name: String },

    #[error("invalid count: {reason}")]
    InvalidCount { reason: String },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("bad magic at byte 0: expected 4f 44 44 46 (\"ODDF\"), found {found:02x?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported feature-file version {found} (supported: 1)")]
    UnsupportedVersion { found: u16 },

    #[error("truncated payload: expected {expected} bytes total, found {actual} (payload starts at byte {payload_offset})")]
    TruncatedPayload {
        expected: u64,
        actual: u64,
        payload_offset: u64,
    },

    #[error("invalid label byte {value} at byte offset {offset} (expected 0, 1 or 255)")]
    InvalidLabel { value: u8, offset: u64 },

    #[error("label count {labels} does not match vector count {vectors}")]
    LabelCountMismatch { labels: usize, vectors: usize },

    #[error("csv parse error at line {line}: {reason}")]
    CsvParse { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
