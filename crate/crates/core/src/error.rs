use std::io;

use thiserror::Error;

/// Errors produced anywhere in the WaRTEm pipeline.
#[derive(Debug, Error)]
pub enum WartemError {
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("parse error at line {line}, field {field}: cannot read {token:?} as a number")]
    Parse {
        line: usize,
        field: usize,
        token: String,
    },

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("window start {start} out of range for series of length {length}")]
    Index { start: usize, length: usize },

    #[error("series of length {0} is too short; at least 4 points are required")]
    SeriesTooShort(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("run with seed {seed} failed: {source}")]
    Seeded {
        seed: u64,
        #[source]
        source: Box<WartemError>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = WartemError> = std::result::Result<T, E>;
