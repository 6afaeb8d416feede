use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported audio format in {}: {reason}", path.display())]
    UnsupportedCodec { path: PathBuf, reason: String },

    #[error("truncated audio payload in {}", .0.display())]
    TruncatedPayload(PathBuf),

    #[error("invalid audio signal: {0}")]
    InvalidSignal(String),

    #[error("empty signal")]
    EmptySignal,

    #[error("invalid STFT configuration: {0}")]
    InvalidStftConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("evaluation window of {window} samples exceeds signal length {len}")]
    WindowTooLong { window: usize, len: usize },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error("unsupported report schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
