//! Minimal reverse-mode autodiff and the transformer encoder built on it.

mod checkpoint;
mod gradcheck;
mod model;
mod tape;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, stats_hash, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{grad_check, grad_check_linear, GradCheckReport};
pub use model::{
    attention_forward, encoder_forward, expected_shapes, key_position_embedding, keyframe_distance,
    predict, relative_bias, relative_bucket, EncoderLayer, Forward, ForwardOptions, Init, Linear,
    ModelConfig, ModelParams, Norm,
};
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite attention logits in layer {layer}, head {head}")]
    NonFiniteLogits { layer: usize, head: usize },
    #[error("key-position embeddings are disabled in this model")]
    KeyPositionDisabled,
    #[error("tape was already consumed by a backward pass")]
    TapeConsumed,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
