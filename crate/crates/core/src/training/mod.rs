//! Loss, optimizer and the epoch loop.

mod loss;
mod optim;
mod trainer;

use thiserror::Error;

use crate::features::FeatureError;
use crate::nn::NnError;

pub use loss::{combined_loss, combined_loss_grad, mse_grad, mse_loss, sign, sign_accuracy, LossValue};
pub use optim::{adam_step, clip_gradients, AdamState};
pub use trainer::{
    predict_split, read_history_csv, train_model, write_history_csv, EpochRecord, TrainConfig, TrainOutcome,
    TrainingCheckpoint, DEFAULT_EPS_LOSS,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty input: need at least one prediction")]
    EmptyInput,
    #[error("length mismatch: {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("history file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
