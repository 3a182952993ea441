//! Graph transformer for trip travel time.
//!
//! A route's segments are the transformer's tokens. Each token starts as a
//! projection of its features plus indegree and outdegree embeddings; every
//! layer adds a learned per-head bias, indexed by hop distance and shared
//! across layers, to the attention scores. Pre-norm blocks are followed by
//! mean pooling, the departure-time features and a small MLP head.

mod backward;
mod forward;
pub mod io;
pub mod ops;
mod optim;
mod params;
mod train;

use thiserror::Error;

pub use backward::{backward, gradient};
pub use forward::{
    attention, attention_bias, forward, forward_trace, huber, input_embedding, loss,
    AttentionTrace, ForwardTrace, LayerTrace, HUBER_DELTA,
};
pub use io::{load_params, model_version, save_params};
pub use optim::{adamw_step, AdamWConfig, OptimState};
pub use params::{LayerWeights, ModelConfig, ModelParams, TargetNorm, Weights};
pub use train::{evaluate, predict, train, train_with, EpochStats, TrainConfig};

pub use crate::encoding::EncodedRoute;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation")]
    NonFiniteActivation,
    #[error("non-finite input")]
    NonFinite,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt parameter file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Encoding(#[from] crate::encoding::EncodingError),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}
