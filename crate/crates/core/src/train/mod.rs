//! L1 training of the encoder with AdamW under a noam schedule.

mod loss;
mod optim;
mod schedule;
mod trainer;

pub use loss::{l1_loss, l1_loss_rows};
pub use optim::{clip_global_norm, AdamW, OptimizerState};
pub use schedule::{noam_lr, sample_transition_length};
pub use trainer::{
    read_loss_csv, train, write_loss_csv, LossRecord, TrainConfig, TrainHooks, TrainOutcome,
    TrainSet,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("learning-rate step must be at least 1")]
    StepZero,
    #[error("non-finite gradient in {name}")]
    NonFiniteGradient { name: String },
    #[error("non-finite loss at step {step}; last good checkpoint: {}", last_checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    NonFiniteLoss {
        step: u64,
        last_checkpoint: Option<PathBuf>,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
