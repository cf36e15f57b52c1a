use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{combined_loss, combined_loss_grad};
use super::optim::{adam_step, clip_gradients, AdamState};
use super::{Result, TrainError};
use crate::features::{Dataset, Split};
use crate::nn::{self, init_model, Checkpoint, ModelSpec, ParamStore};

pub const DEFAULT_EPS_LOSS: f64 = 1e-6;
/// Sequences per forward pass when scoring a whole split.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eps_loss: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            epochs: 30,
            batch_size: 64,
            seed: 0,
            eps_loss: DEFAULT_EPS_LOSS,
            clip_norm: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.eps_loss > 0.0) {
            return bad(format!("eps_loss must be > 0, got {}", self.eps_loss));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be > 0, got {}", self.clip_norm));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("Adam betas must lie in [0, 1), got ({}, {})", self.beta1, self.beta2));
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be > 0, got {}", self.adam_eps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Model checkpoint plus the context it was trained in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCheckpoint {
    #[serde(flatten)]
    pub model: Checkpoint,
    pub config: TrainConfig,
    pub epoch_of_best: usize,
    pub dataset_fingerprint: String,
}

impl TrainingCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| TrainError::Nn(nn::NnError::Checkpoint(e.to_string())))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub final_params: ParamStore,
    /// Parameters after the epoch with the lowest validation loss.
    pub best_params: ParamStore,
    pub epoch_of_best: usize,
    pub history: Vec<EpochRecord>,
    pub dataset_fingerprint: String,
}

impl TrainOutcome {
    pub fn best_checkpoint(&self) -> TrainingCheckpoint {
        self.checkpoint(&self.best_params)
    }

    pub fn final_checkpoint(&self) -> TrainingCheckpoint {
        self.checkpoint(&self.final_params)
    }

    fn checkpoint(&self, params: &ParamStore) -> TrainingCheckpoint {
        TrainingCheckpoint {
            model: Checkpoint::from_params(params, self.config.seed),
            config: self.config.clone(),
            epoch_of_best: self.epoch_of_best,
            dataset_fingerprint: self.dataset_fingerprint.clone(),
        }
    }
}

fn check_shapes(spec: &ModelSpec, dataset: &Dataset) -> Result<()> {
    if spec.lookback != dataset.lookback || spec.feature_count != dataset.feature_count() {
        return Err(TrainError::Nn(nn::NnError::Shape(format!(
            "model expects lookback {} × {} features, dataset has {} × {}",
            spec.lookback,
            spec.feature_count,
            dataset.lookback,
            dataset.feature_count()
        ))));
    }
    Ok(())
}

/// Predictions for every sequence of `split`, in sequence order.
pub fn predict_split(spec: &ModelSpec, params: &ParamStore, dataset: &Dataset, split: Split) -> Result<Vec<f64>> {
    check_shapes(spec, dataset)?;
    let n = dataset.count(split);
    let mut out = Vec::with_capacity(n);
    let mut buf = Vec::new();
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        dataset.gather(split, chunk, &mut buf);
        out.extend(nn::predict(spec, params, &buf, chunk.len())?);
    }
    Ok(out)
}

/// Mini-batch training with seeded shuffling, clipping and Adam; keeps the
/// parameters of the epoch with the lowest validation loss.
pub fn train_model(spec: &ModelSpec, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    check_shapes(spec, dataset)?;
    for split in [Split::Train, Split::Val] {
        if dataset.count(split) == 0 {
            return Err(TrainError::EmptyInput);
        }
    }

    let mut params = init_model(spec, config.seed)?;
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let labels = dataset.labels(Split::Train);
    let mut order: Vec<usize> = (0..dataset.count(Split::Train)).collect();
    let mut input = Vec::new();
    let mut batch_labels = Vec::new();
    let mut dpred = Vec::new();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            dataset.gather(Split::Train, chunk, &mut input);
            batch_labels.clear();
            batch_labels.extend(chunk.iter().map(|&i| labels[i]));
            let (pred, cache) = nn::model_forward_raw(spec, &params, &input, chunk.len())?;
            dpred.resize(chunk.len(), 0.0);
            let loss = combined_loss_grad(&pred, &batch_labels, config.eps_loss, &mut dpred)?;
            if !loss.loss.is_finite() {
                return Err(TrainError::Diverged(format!(
                    "non-finite loss at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            let mut grads = nn::model_backward_raw(spec, &params, &cache, &dpred)?;
            clip_gradients(grads.values_mut(), config.clip_norm);
            adam_step(params.values_mut(), grads.values(), &mut adam, config)
                .map_err(|e| TrainError::Diverged(format!("epoch {epoch}, batch {}: {e}", b + 1)))?;
        }

        let score = |split: Split| -> Result<(f64, f64)> {
            let pred = predict_split(spec, &params, dataset, split)?;
            let v = combined_loss(&pred, dataset.labels(split), config.eps_loss)?;
            if !v.loss.is_finite() {
                return Err(TrainError::Diverged(format!("non-finite {split} loss after epoch {epoch}")));
            }
            Ok((v.loss, v.acc))
        };
        let (train_loss, train_acc) = score(Split::Train)?;
        let (val_loss, val_acc) = score(Split::Val)?;
        log::debug!("{} L={} epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e}", spec.kind, spec.lookback);
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
        });
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, params.clone()));
        }
    }

    let (_, epoch_of_best, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        spec: spec.clone(),
        config: config.clone(),
        final_params: params,
        best_params,
        epoch_of_best,
        history,
        dataset_fingerprint: dataset.fingerprint(),
    })
}

const HISTORY_HEADER: [&str; 5] = ["epoch", "train_loss", "val_loss", "train_acc", "val_acc"];

pub fn write_history_csv<W: Write>(history: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let to_io = |e: csv::Error| TrainError::Io(std::io::Error::other(e));
    w.write_record(HISTORY_HEADER).map_err(to_io)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.train_acc.to_string(),
            r.val_acc.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv<R: Read>(reader: R) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| TrainError::Format(e.to_string()))?;
    if header.iter().ne(HISTORY_HEADER) {
        return Err(TrainError::Format(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| TrainError::Format(e.to_string())))
        .collect()
}
