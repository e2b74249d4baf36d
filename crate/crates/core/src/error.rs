use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid action level {0}, expected 1..=4")]
    InvalidAction(i64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("vaccination stream has no entry for day {day} (covers {len} days)")]
    MalformedStream { day: u32, len: usize },

    #[error("particle filter degenerate at day {day}: observation impossible under every particle")]
    Degenerate { day: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("missing input file {0}")]
    MissingFile(PathBuf),

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error("date misalignment: {0}")]
    DateMisalignment(String),

    #[error("wrong status: {0}")]
    WrongStatus(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
