use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::{evaluate_predictions, EvalReport, SplitEval};
use super::Result;
use crate::features::{Dataset, PreparedFeatures, Split, SplitRanges};
use crate::nn::{ModelKind, ModelSpec};
use crate::training::{predict_split, train_model, EpochRecord, TrainConfig, TrainingCheckpoint};

/// Lookbacks compared in the reference experiment: one week, three days, one day, half a day.
pub const REFERENCE_LOOKBACKS: [usize; 4] = [168, 72, 24, 12];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub kinds: Vec<ModelKind>,
    pub lookbacks: Vec<usize>,
    pub horizon: usize,
    pub train: TrainConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            kinds: ModelKind::ALL.to_vec(),
            lookbacks: REFERENCE_LOOKBACKS.to_vec(),
            horizon: 2,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// One (model, lookback) result. Failed cells keep `error` and no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub kind: ModelKind,
    pub lookback: usize,
    pub seed: u64,
    pub sequences: Option<SequenceCounts>,
    pub eval: Option<EvalReport>,
    pub error: Option<String>,
    pub epoch_of_best: Option<usize>,
    pub history: Vec<EpochRecord>,
    pub test_predictions: Vec<f64>,
    pub test_labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub horizon: usize,
    pub kinds: Vec<ModelKind>,
    pub lookbacks: Vec<usize>,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub matrix_rows: usize,
    pub splits: SplitRanges,
    pub feature_names: Vec<String>,
    /// Row-major over `kinds × lookbacks`.
    pub cells: Vec<GridCell>,
}

impl GridReport {
    pub fn cell(&self, kind: ModelKind, lookback: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.kind == kind && c.lookback == lookback)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct GridOutput {
    pub report: GridReport,
    /// Best-validation checkpoint per successful cell, in cell order.
    pub checkpoints: Vec<(ModelKind, usize, TrainingCheckpoint)>,
}

/// `seed ⊕ h(kind, L)` with `h` the first 8 bytes of SHA-256 over `"kind:L"`.
pub fn cell_seed(seed: u64, kind: ModelKind, lookback: usize) -> u64 {
    let digest = Sha256::digest(format!("{kind}:{lookback}").as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

struct CellRun {
    cell: GridCell,
    checkpoint: Option<TrainingCheckpoint>,
}

fn run_cell(kind: ModelKind, lookback: usize, dataset: &std::result::Result<Dataset, String>, config: &GridConfig) -> CellRun {
    let seed = cell_seed(config.train.seed, kind, lookback);
    let mut cell = GridCell {
        kind,
        lookback,
        seed,
        sequences: None,
        eval: None,
        error: None,
        epoch_of_best: None,
        history: Vec::new(),
        test_predictions: Vec::new(),
        test_labels: Vec::new(),
    };
    let dataset = match dataset {
        Ok(d) => d,
        Err(e) => {
            cell.error = Some(e.clone());
            return CellRun { cell, checkpoint: None };
        }
    };
    cell.sequences = Some(SequenceCounts {
        train: dataset.count(Split::Train),
        val: dataset.count(Split::Val),
        test: dataset.count(Split::Test),
    });
    let attempt = || -> Result<(EvalReport, Vec<f64>, crate::training::TrainOutcome)> {
        let spec = ModelSpec::new(kind, lookback, dataset.feature_count())?;
        let train = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let outcome = train_model(&spec, dataset, &train)?;
        let score = |split: Split| -> Result<SplitEval> {
            let pred = predict_split(&spec, &outcome.best_params, dataset, split)?;
            evaluate_predictions(dataset, split, &pred)
        };
        let test_pred = predict_split(&spec, &outcome.best_params, dataset, Split::Test)?;
        let eval = EvalReport {
            train: score(Split::Train)?,
            val: score(Split::Val)?,
            test: evaluate_predictions(dataset, Split::Test, &test_pred)?,
        };
        Ok((eval, test_pred, outcome))
    };
    match attempt() {
        Ok((eval, pred, outcome)) => {
            log::info!(
                "{kind} L={lookback}: test MAE {:.4}% vs baseline {:.4}%",
                100.0 * eval.test.mae,
                100.0 * eval.test.baseline_mae
            );
            cell.eval = Some(eval);
            cell.test_predictions = pred;
            cell.test_labels = dataset.labels(Split::Test).to_vec();
            cell.epoch_of_best = Some(outcome.epoch_of_best);
            let checkpoint = outcome.best_checkpoint();
            cell.history = outcome.history;
            CellRun {
                cell,
                checkpoint: Some(checkpoint),
            }
        }
        Err(e) => {
            log::warn!("{kind} L={lookback} failed: {e}");
            cell.error = Some(e.to_string());
            CellRun { cell, checkpoint: None }
        }
    }
}

/// Train and score every (kind, lookback) cell on one prepared feature set.
///
/// All lookbacks share the feature matrix, its split boundaries and the
/// scaler, so only the sequence windows differ between columns. Cells run in
/// parallel; results are assembled in `kinds × lookbacks` order.
pub fn run_grid(prepared: &PreparedFeatures, config: &GridConfig) -> Result<GridOutput> {
    config.train.validate()?;
    let datasets: Vec<std::result::Result<Dataset, String>> = config
        .lookbacks
        .iter()
        .map(|&l| prepared.dataset(l, config.horizon).map_err(|e| e.to_string()))
        .collect();
    let jobs: Vec<(ModelKind, usize, usize)> = config
        .kinds
        .iter()
        .flat_map(|&k| config.lookbacks.iter().enumerate().map(move |(i, &l)| (k, l, i)))
        .collect();
    let runs: Vec<CellRun> = jobs
        .par_iter()
        .map(|&(kind, lookback, i)| run_cell(kind, lookback, &datasets[i], config))
        .collect();

    let mut cells = Vec::with_capacity(runs.len());
    let mut checkpoints = Vec::new();
    for run in runs {
        if let Some(ck) = run.checkpoint {
            checkpoints.push((run.cell.kind, run.cell.lookback, ck));
        }
        cells.push(run.cell);
    }
    let report = GridReport {
        horizon: config.horizon,
        kinds: config.kinds.clone(),
        lookbacks: config.lookbacks.clone(),
        seed: config.train.seed,
        train_config: config.train.clone(),
        matrix_rows: prepared.matrix.rows(),
        splits: prepared.splits.clone(),
        feature_names: prepared.matrix.names().iter().map(|s| s.to_string()).collect(),
        cells,
    };
    Ok(GridOutput { report, checkpoints })
}
