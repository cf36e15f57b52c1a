//! Scoring against the naive baseline, threshold accuracy, the lookback grid
//! and its rendered report.

mod grid;
mod metrics;
mod render;
mod report;

use thiserror::Error;

use crate::features::FeatureError;
use crate::nn::NnError;
use crate::training::TrainError;

pub use grid::{cell_seed, run_grid, GridCell, GridConfig, GridOutput, GridReport, SequenceCounts, REFERENCE_LOOKBACKS};
pub use metrics::{baseline_prediction, mean_absolute_error, threshold_accuracy, ThresholdAccuracy};
pub use render::{emit_report, read_table, write_checkpoints, TableRow};
pub use report::{baseline_predictions, evaluate_model, evaluate_predictions, EvalReport, Predictor, SplitEval, TrainedModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: nothing to score")]
    EmptyInput,
    #[error("length mismatch: {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("invalid threshold {0}: must be finite and >= 0")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("report: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
