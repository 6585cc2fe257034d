use std::fmt;

/// Errors produced across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("no utterances")]
    NoUtterances,

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("empty conversation")]
    EmptyConversation,

    #[error("dataset too small to split")]
    DatasetTooSmall,

    #[error("empty test set")]
    EmptyTestSet,

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("out-of-order event: end {end_ms}ms precedes stream clock {clock_ms}ms")]
    OutOfOrder { end_ms: u64, clock_ms: u64 },

    #[error("insufficient history: {have_ms}ms observed, {need_ms}ms required")]
    InsufficientHistory { have_ms: u64, need_ms: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl fmt::Display) -> Self {
        Error::Invalid {
            what,
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
