//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    IndexOutOfRange { index: usize, num_nodes: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("negative sampling exhausted: needed {needed} pairs, gave up after {attempts} draws (graph too dense)")]
    NegativeSamplingExhausted { needed: usize, attempts: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite value in {stage}")]
    NonFinite { stage: String },

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
