use crate::checkpoint::Checkpoint;
use crate::optim::TrainLog;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by dataset handling, model evaluation, and training.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    MalformedRecord { line: usize, msg: String },

    #[error("line {line}: object index {index} out of range (num_objects = {num_objects})")]
    IndexRange {
        line: usize,
        index: u32,
        num_objects: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("optimization diverged at epoch {epoch}; last finite state attached")]
    Diverged {
        epoch: usize,
        checkpoint: Box<Checkpoint>,
        log: Box<TrainLog>,
    },

    #[error("non-finite gradient at step {step}: {msg}")]
    NonFiniteGradient { step: u64, msg: String },

    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
