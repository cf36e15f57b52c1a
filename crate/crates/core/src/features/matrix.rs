use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::indicators::{self, IndicatorSeries};
use super::{FeatureError, Result, StationarityReport};
use crate::market_data::CandleSeries;

/// Leading rows without a value in every default column (MACD signal: 26 + 9 − 2).
pub const FEATURE_WARMUP: usize = indicators::MACD_SLOW + indicators::MACD_SIGNAL - 2;

pub const EMA_PERIOD: usize = 12;
pub const SMA_PERIOD: usize = 12;
pub const STOCH_K: usize = 14;
pub const STOCH_D: usize = 3;
pub const RSI_PERIOD: usize = 14;

/// Default column order. Checkpoints depend on it.
pub const DEFAULT_COLUMNS: [&str; 8] = [
    "return", "ema12", "macd_line", "macd_signal", "stoch_k", "stoch_d", "rsi", "sma12",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Append raw open/high/low/close/volume columns after the defaults.
    pub include_ohlcv: bool,
    pub max_differencing_rounds: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            include_ohlcv: false,
            max_differencing_rounds: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub differencing_order: usize,
    pub scale: f64,
}

impl ColumnMeta {
    fn new(name: &str) -> Self {
        ColumnMeta {
            name: name.to_string(),
            differencing_order: 0,
            scale: 1.0,
        }
    }
}

/// Time-aligned feature columns.
///
/// Besides the features, each row keeps the candle close and the unscaled
/// one-step return at that time; labels and the naive baseline come from these.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub times: Vec<i64>,
    pub columns: Vec<Vec<f64>>,
    pub meta: Vec<ColumnMeta>,
    pub closes: Vec<f64>,
    pub returns: Vec<f64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.meta
            .iter()
            .position(|m| m.name == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn names(&self) -> Vec<&str> {
        self.meta.iter().map(|m| m.name.as_str()).collect()
    }

    /// Check the structural invariants: equal lengths, finite values, positive scales.
    pub fn validate(&self) -> Result<()> {
        let n = self.rows();
        if self.columns.len() != self.meta.len() {
            return Err(FeatureError::Format("column/meta count mismatch".into()));
        }
        if self.closes.len() != n || self.returns.len() != n {
            return Err(FeatureError::Format("auxiliary series length mismatch".into()));
        }
        for (col, meta) in self.columns.iter().zip(&self.meta) {
            if col.len() != n {
                return Err(FeatureError::Format(format!(
                    "column {} has {} rows, expected {n}",
                    meta.name,
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(FeatureError::Format(format!(
                    "column {} has a non-finite value at row {i}",
                    meta.name
                )));
            }
            if !(meta.scale > 0.0) {
                return Err(FeatureError::Format(format!("column {} has scale {}", meta.name, meta.scale)));
            }
        }
        Ok(())
    }

    /// Drop the first `k` rows of every series.
    pub(crate) fn trim_front(&mut self, k: usize) {
        self.times.drain(..k);
        self.closes.drain(..k);
        self.returns.drain(..k);
        for c in &mut self.columns {
            c.drain(..k);
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let to_io = |e: csv::Error| FeatureError::Io(std::io::Error::other(e));
        let mut header = vec!["open_time"];
        header.extend(self.names());
        w.write_record(&header).map_err(to_io)?;
        for (r, t) in self.times.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.columns.iter().map(|c| c[r].to_string()));
            w.write_record(&rec).map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compute the default indicator columns and drop rows inside the warm-up.
pub fn assemble_features(series: &CandleSeries, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let n = series.len();
    let needed = indicators::MACD_SLOW + indicators::MACD_SIGNAL;
    if n < needed {
        return Err(FeatureError::InsufficientData {
            what: "MACD signal warm-up (26 + 9 periods)",
            needed,
            got: n,
        });
    }
    let close = series.closes();
    let high = series.highs();
    let low = series.lows();

    let returns = indicators::compute_returns(&close)?;
    let ema12 = indicators::ema(&close, EMA_PERIOD)?;
    let macd = indicators::macd(&close)?;
    let stoch = indicators::stochastic_kd(&high, &low, &close, STOCH_K, STOCH_D)?;
    let rsi = indicators::rsi(&close, RSI_PERIOD)?;
    let sma12 = indicators::sma(&close, SMA_PERIOD)?;

    let defaults: [&IndicatorSeries; 8] = [
        &returns,
        &ema12,
        &macd.line,
        &macd.signal,
        &stoch.k,
        &stoch.d,
        &rsi,
        &sma12,
    ];
    debug_assert_eq!(defaults.iter().map(|s| s.start).max(), Some(FEATURE_WARMUP));

    let mut columns: Vec<Vec<f64>> = defaults
        .iter()
        .map(|s| s.from_index(FEATURE_WARMUP).to_vec())
        .collect();
    let mut meta: Vec<ColumnMeta> = DEFAULT_COLUMNS.iter().map(|n| ColumnMeta::new(n)).collect();

    let kept = &series.candles[FEATURE_WARMUP..];
    if config.include_ohlcv {
        let raw: [(&str, fn(&crate::market_data::Candle) -> f64); 5] = [
            ("open", |c| c.open),
            ("high", |c| c.high),
            ("low", |c| c.low),
            ("close", |c| c.close),
            ("volume", |c| c.volume),
        ];
        for (name, get) in raw {
            columns.push(kept.iter().map(get).collect());
            meta.push(ColumnMeta::new(name));
        }
    }

    let matrix = FeatureMatrix {
        times: kept.iter().map(|c| c.open_time).collect(),
        columns,
        meta,
        closes: kept.iter().map(|c| c.close).collect(),
        returns: returns.from_index(FEATURE_WARMUP).to_vec(),
    };
    matrix.validate()?;
    Ok(matrix)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    columns: Vec<ColumnMeta>,
    stationarity: StationarityReport,
}

/// Write `<path>` (CSV, `open_time` first) and `<path>.meta.json` with the
/// column metadata and stationarity report.
pub fn save_feature_matrix(matrix: &FeatureMatrix, report: &StationarityReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    matrix.write_csv(BufWriter::new(File::create(path)?))?;
    let sidecar = Sidecar {
        columns: matrix.meta.clone(),
        stationarity: report.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| FeatureError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

/// Read back the column metadata and stationarity report written next to a matrix CSV.
pub fn load_feature_matrix(path: &Path) -> Result<(Vec<ColumnMeta>, StationarityReport)> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| FeatureError::Format(e.to_string()))?;
    Ok((sidecar.columns, sidecar.stationarity))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.json");
    p.into()
}
