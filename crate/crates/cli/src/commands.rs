use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use serde::Serialize;

use candleforge::evaluation::{emit_report, evaluate_model, run_grid, write_checkpoints, GridConfig, TrainedModel};
use candleforge::features::{save_feature_matrix, PreparedFeatures, SplitRanges, StationarityReport};
use candleforge::market_data::{
    load_candles_csv, repair_gaps, save_candles_csv, validate_series, CandleSeries, FetchRange, KlineClient,
};
use candleforge::nn::ModelSpec;
use candleforge::training::{train_model, write_history_csv, TrainingCheckpoint};
use candleforge::verify::{run_all, VerifyOptions};

use crate::config::{Overrides, RunConfig};
use crate::manifest::Manifest;
use crate::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, config or missing input files.
    Usage,
    /// A pipeline stage failed.
    Pipeline,
    /// `verify` ran but a suite failed.
    Verification,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 2,
            ErrorKind::Pipeline | ErrorKind::Verification => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Usage => "usage",
            ErrorKind::Pipeline => "pipeline",
            ErrorKind::Verification => "verification",
        };
        writeln!(f, "error: {}", self.source)?;
        writeln!(f, "  kind: {kind}")?;
        write!(f, "  stage: {}", self.stage)?;
        for cause in self.source.chain().skip(1) {
            write!(f, "\n  caused by: {cause}")?;
        }
        Ok(())
    }
}

type Result<T> = std::result::Result<T, CliError>;

trait Stage<T> {
    fn stage(self, kind: ErrorKind, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for std::result::Result<T, E> {
    fn stage(self, kind: ErrorKind, stage: &'static str) -> Result<T> {
        self.map_err(|e| CliError {
            kind,
            stage,
            source: e.into(),
        })
    }
}

fn usage(stage: &'static str, message: String) -> CliError {
    CliError {
        kind: ErrorKind::Usage,
        stage,
        source: anyhow!(message),
    }
}

pub fn run(command: &Command, config_path: Option<&Path>, overrides: &Overrides) -> Result<()> {
    let mut config = match config_path {
        Some(p) => RunConfig::load(p).stage(ErrorKind::Usage, "config")?,
        None => RunConfig::default(),
    };
    config.apply(overrides);
    config.validate().stage(ErrorKind::Usage, "config")?;
    let out_dir = config.paths.out_dir.clone();

    let (name, inputs, outputs, manifest_dir) = match command {
        Command::Fetch => {
            // fetched candles land where later stages look for them, unless --out is given
            let dir = overrides.out.clone().unwrap_or_else(|| config.paths.data_dir.clone());
            let (inputs, outputs) = fetch(&config, &dir)?;
            ("fetch", inputs, outputs, dir)
        }
        Command::Featurize => {
            let (inputs, outputs) = featurize(&config, &out_dir)?;
            ("featurize", inputs, outputs, out_dir)
        }
        Command::Train => {
            let (inputs, outputs) = train(&config, &out_dir)?;
            ("train", inputs, outputs, out_dir)
        }
        Command::Eval { checkpoint } => {
            let (inputs, outputs) = eval(&config, checkpoint, &out_dir)?;
            ("eval", inputs, outputs, out_dir)
        }
        Command::Grid => {
            let (inputs, outputs) = grid(&config, &out_dir)?;
            ("grid", inputs, outputs, out_dir)
        }
        Command::Verify => return verify(&config, &out_dir),
    };
    let path = Manifest::new(name, &config, &inputs, &outputs)
        .and_then(|m| m.write(&manifest_dir))
        .stage(ErrorKind::Pipeline, "manifest")?;
    log::info!("wrote {}", path.display());
    Ok(())
}

type Files = (Vec<PathBuf>, Vec<PathBuf>);

fn create_dir(dir: &Path, stage: &'static str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .stage(ErrorKind::Pipeline, stage)
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Result<()> {
    let json = serde_json::to_string_pretty(value).stage(ErrorKind::Pipeline, stage)?;
    std::fs::write(path, json + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .stage(ErrorKind::Pipeline, stage)
}

/// Candles from `--from-csv` or the data directory, with gaps filled.
fn load_candles(config: &RunConfig, stage: &'static str) -> Result<(CandleSeries, PathBuf)> {
    let path = config.data.from_csv.clone().unwrap_or_else(|| config.candles_path());
    if !path.is_file() {
        return Err(usage(
            stage,
            format!("missing candle file {} (run `fetch` or pass --from-csv)", path.display()),
        ));
    }
    let raw = load_candles_csv(&path, &config.data.symbol, config.data.interval).stage(ErrorKind::Pipeline, stage)?;
    let repaired = repair_gaps(&raw).stage(ErrorKind::Pipeline, stage)?;
    if repaired.inserted > 0 {
        log::info!("filled {} missing candles", repaired.inserted);
    }
    Ok((repaired.series, path))
}

fn prepare(config: &RunConfig, stage: &'static str) -> Result<(PreparedFeatures, PathBuf)> {
    let (series, path) = load_candles(config, stage)?;
    let prepared = PreparedFeatures::from_series(&series, &config.feature_config()).stage(ErrorKind::Pipeline, stage)?;
    Ok((prepared, path))
}

fn fetch(config: &RunConfig, dir: &Path) -> Result<Files> {
    let (series, inputs) = match &config.data.from_csv {
        Some(_) => {
            let (s, p) = load_candles(config, "fetch")?;
            (s, vec![p])
        }
        None => {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as i64)
                .unwrap_or(0);
            let range = FetchRange::last_days(now, config.data.days_back, config.data.interval)
                .stage(ErrorKind::Usage, "fetch")?;
            let client = KlineClient::from_env();
            log::info!("fetching {} {} from {}", config.data.symbol, config.data.interval.as_str(), client.base_url());
            let raw = client
                .fetch_klines(&config.data.symbol, &range)
                .stage(ErrorKind::Pipeline, "fetch")?;
            let repaired = repair_gaps(&raw).stage(ErrorKind::Pipeline, "fetch")?;
            log::info!("{} candles, {} filled", repaired.series.len(), repaired.inserted);
            (repaired.series, Vec::new())
        }
    };
    let report = validate_series(&series);
    if !report.is_ok() {
        return Err(CliError {
            kind: ErrorKind::Pipeline,
            stage: "fetch",
            source: anyhow!("repaired series failed validation: {:?}", report.violations.first()),
        });
    }
    create_dir(dir, "fetch")?;
    let path = dir.join(format!(
        "{}_{}.csv",
        config.data.symbol.to_lowercase(),
        config.data.interval.as_str()
    ));
    save_candles_csv(&series, &path).stage(ErrorKind::Pipeline, "fetch")?;
    println!("saved {} candles to {}", series.len(), path.display());
    Ok((inputs, vec![path]))
}

#[derive(Serialize)]
struct FeaturizeSummary {
    rows: usize,
    columns: Vec<String>,
    scales: Vec<f64>,
    splits: SplitRanges,
    stationarity: StationarityReport,
    horizon: usize,
    /// Sequences per split for each configured lookback, or why none could be built.
    sequences: Vec<LookbackSequences>,
}

#[derive(Serialize)]
struct LookbackSequences {
    lookback: usize,
    train: Option<usize>,
    val: Option<usize>,
    test: Option<usize>,
    error: Option<String>,
}

fn featurize(config: &RunConfig, out: &Path) -> Result<Files> {
    let (prepared, input) = prepare(config, "featurize")?;
    create_dir(out, "featurize")?;
    let matrix_path = out.join("features.csv");
    save_feature_matrix(&prepared.matrix, &prepared.report, &matrix_path).stage(ErrorKind::Pipeline, "featurize")?;
    let horizon = config.features.horizon;
    let sequences = config
        .models
        .lookbacks
        .iter()
        .map(|&lookback| match prepared.dataset(lookback, horizon) {
            Ok(ds) => {
                use candleforge::features::Split;
                LookbackSequences {
                    lookback,
                    train: Some(ds.count(Split::Train)),
                    val: Some(ds.count(Split::Val)),
                    test: Some(ds.count(Split::Test)),
                    error: None,
                }
            }
            Err(e) => LookbackSequences {
                lookback,
                train: None,
                val: None,
                test: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let summary = FeaturizeSummary {
        rows: prepared.matrix.rows(),
        columns: prepared.matrix.names().iter().map(|s| s.to_string()).collect(),
        scales: prepared.scaler.scales.clone(),
        splits: prepared.splits.clone(),
        stationarity: prepared.report.clone(),
        horizon,
        sequences,
    };
    let summary_path = out.join("featurize.json");
    write_json(&summary_path, &summary, "featurize")?;
    for c in &prepared.report.columns {
        println!(
            "{:<12} t={:>9} differenced {}x{}",
            c.name,
            c.t_statistic.map_or("-".into(), |t| format!("{t:.3}")),
            c.differencing_applied,
            if c.excluded { " (excluded)" } else { "" }
        );
    }
    println!("{} rows, features in {}", prepared.matrix.rows(), matrix_path.display());
    let mut sidecar = matrix_path.as_os_str().to_owned();
    sidecar.push(".meta.json");
    Ok((vec![input], vec![matrix_path, sidecar.into(), summary_path]))
}

fn train(config: &RunConfig, out: &Path) -> Result<Files> {
    let kind = config.single_kind().stage(ErrorKind::Usage, "train")?;
    let lookback = config.single_lookback().stage(ErrorKind::Usage, "train")?;
    let (prepared, input) = prepare(config, "train")?;
    let ds = prepared
        .dataset(lookback, config.features.horizon)
        .stage(ErrorKind::Pipeline, "train")?;
    let spec = ModelSpec::new(kind, lookback, ds.feature_count()).stage(ErrorKind::Usage, "train")?;
    let outcome = train_model(&spec, &ds, &config.train_config()).stage(ErrorKind::Pipeline, "train")?;

    create_dir(out, "train")?;
    let ck_path = out.join(format!("{kind}_L{lookback}.json"));
    outcome.best_checkpoint().save(&ck_path).stage(ErrorKind::Pipeline, "train")?;
    let history_path = out.join(format!("{kind}_L{lookback}_history.csv"));
    let file = std::fs::File::create(&history_path)
        .with_context(|| format!("creating {}", history_path.display()))
        .stage(ErrorKind::Pipeline, "train")?;
    write_history_csv(&outcome.history, file).stage(ErrorKind::Pipeline, "train")?;
    for r in &outcome.history {
        println!(
            "epoch {:>3}  train {:.6e} (acc {:.3})  val {:.6e} (acc {:.3})",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        );
    }
    println!("best epoch {}, checkpoint {}", outcome.epoch_of_best, ck_path.display());
    Ok((vec![input], vec![ck_path, history_path]))
}

fn eval(config: &RunConfig, checkpoint: &Path, out: &Path) -> Result<Files> {
    if !checkpoint.is_file() {
        return Err(usage("eval", format!("missing checkpoint {}", checkpoint.display())));
    }
    let ck = TrainingCheckpoint::load(checkpoint).stage(ErrorKind::Pipeline, "eval")?;
    let params = ck.model.to_params().stage(ErrorKind::Pipeline, "eval")?;
    let spec = ck.model.spec.clone();
    let (prepared, input) = prepare(config, "eval")?;
    let ds = prepared
        .dataset(spec.lookback, config.features.horizon)
        .stage(ErrorKind::Pipeline, "eval")?;
    if ds.fingerprint() != ck.dataset_fingerprint {
        log::warn!("checkpoint was trained on a different dataset; scores are out-of-sample for it");
    }
    let report = evaluate_model(&TrainedModel { spec: spec.clone(), params }, &ds).stage(ErrorKind::Pipeline, "eval")?;
    create_dir(out, "eval")?;
    let path = out.join(format!("eval_{}_L{}.json", spec.kind, spec.lookback));
    write_json(&path, &report, "eval")?;
    println!("{:<6} {:>10} {:>10} {:>9} {:>10}", "split", "MAE %", "base %", "retained", "thr acc");
    for (name, s) in [("train", &report.train), ("val", &report.val), ("test", &report.test)] {
        println!(
            "{name:<6} {:>10.4} {:>10.4} {:>9} {:>10}",
            100.0 * s.mae,
            100.0 * s.baseline_mae,
            s.retained_count,
            s.threshold_accuracy.map_or("-".into(), |a| format!("{a:.3}"))
        );
    }
    Ok((vec![input, checkpoint.to_path_buf()], vec![path]))
}

fn grid(config: &RunConfig, out: &Path) -> Result<Files> {
    let (prepared, input) = prepare(config, "grid")?;
    let grid_config = GridConfig {
        kinds: config.models.kinds.clone(),
        lookbacks: config.models.lookbacks.clone(),
        horizon: config.features.horizon,
        train: config.train_config(),
    };
    let output = run_grid(&prepared, &grid_config).stage(ErrorKind::Pipeline, "grid")?;
    create_dir(out, "grid")?;
    let mut outputs = emit_report(&output.report, out).stage(ErrorKind::Pipeline, "grid")?;
    outputs.extend(write_checkpoints(&output, out).stage(ErrorKind::Pipeline, "grid")?);
    for cell in &output.report.cells {
        match (&cell.eval, &cell.error) {
            (Some(e), _) => println!(
                "{:<5} L{:<4} test MAE {:.4}% (baseline {:.4}%)",
                cell.kind,
                cell.lookback,
                100.0 * e.test.mae,
                100.0 * e.test.baseline_mae
            ),
            (None, Some(err)) => println!("{:<5} L{:<4} failed: {err}", cell.kind, cell.lookback),
            (None, None) => {}
        }
    }
    println!("{} cells, report in {}", output.report.cells.len(), out.display());
    Ok((vec![input], outputs))
}

fn verify(config: &RunConfig, out: &Path) -> Result<()> {
    let report = run_all(&VerifyOptions {
        seed: config.seed,
        ..VerifyOptions::default()
    });
    for s in &report.suites {
        println!("{} {}: {}", if s.passed { "PASS" } else { "FAIL" }, s.name, s.detail);
    }
    create_dir(out, "verify")?;
    let path = out.join("verify.json");
    write_json(&path, &report, "verify")?;
    Manifest::new("verify", config, &[], std::slice::from_ref(&path))
        .and_then(|m| m.write(out))
        .stage(ErrorKind::Pipeline, "manifest")?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        Err(CliError {
            kind: ErrorKind::Verification,
            stage: "verify",
            source: anyhow!("{} suite(s) failed: {}", failed.len(), failed.join("; ")),
        })
    }
}
