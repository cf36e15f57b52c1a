use serde::{Deserialize, Serialize};

use super::metrics::{baseline_prediction, mean_absolute_error, threshold_accuracy};
use super::Result;
use crate::features::{Dataset, Split};
use crate::nn::{ModelSpec, ParamStore};
use crate::training::predict_split;

/// Scores for one split. `threshold` is the model's own MAE on that split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub mae: f64,
    pub baseline_mae: f64,
    pub prediction_count: usize,
    pub threshold: f64,
    pub retained_count: usize,
    pub threshold_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train: SplitEval,
    pub val: SplitEval,
    pub test: SplitEval,
}

impl EvalReport {
    pub fn get(&self, split: Split) -> &SplitEval {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Anything that can produce one prediction per sequence of a split.
pub trait Predictor {
    fn predict(&self, dataset: &Dataset, split: Split) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ParamStore,
}

impl Predictor for TrainedModel {
    fn predict(&self, dataset: &Dataset, split: Split) -> Result<Vec<f64>> {
        Ok(predict_split(&self.spec, &self.params, dataset, split)?)
    }
}

/// Baseline forecast for every sequence of `split`.
pub fn baseline_predictions(dataset: &Dataset, split: Split) -> Result<Vec<f64>> {
    (0..dataset.count(split))
        .map(|i| baseline_prediction(dataset.window_returns(split, i)))
        .collect()
}

/// Score given predictions for one split against its labels and the baseline.
pub fn evaluate_predictions(dataset: &Dataset, split: Split, predictions: &[f64]) -> Result<SplitEval> {
    let labels = dataset.labels(split);
    let mae = mean_absolute_error(predictions, labels)?;
    let baseline_mae = mean_absolute_error(&baseline_predictions(dataset, split)?, labels)?;
    let thr = threshold_accuracy(predictions, labels, mae)?;
    Ok(SplitEval {
        mae,
        baseline_mae,
        prediction_count: predictions.len(),
        threshold: mae,
        retained_count: thr.retained,
        threshold_accuracy: thr.accuracy,
    })
}

pub fn evaluate_model(model: &dyn Predictor, dataset: &Dataset) -> Result<EvalReport> {
    let score = |split| evaluate_predictions(dataset, split, &model.predict(dataset, split)?);
    Ok(EvalReport {
        train: score(Split::Train)?,
        val: score(Split::Val)?,
        test: score(Split::Test)?,
    })
}
