//! Feature engineering: indicators, stationarity, scaling and sequence datasets.

pub mod adf;
mod dataset;
pub mod indicators;
mod matrix;
mod scaling;
mod stationarity;

use thiserror::Error;

pub use adf::{adf_test, AdfResult, CRITICAL_VALUE_5PCT};
pub use dataset::{build_sequences, split_timeline, Dataset, Split, SplitRanges};
pub use indicators::{
    compute_returns, difference, ema, macd, rsi, sma, stochastic_kd, IndicatorSeries,
};
pub use matrix::{
    assemble_features, load_feature_matrix, save_feature_matrix, ColumnMeta, FeatureConfig,
    FeatureMatrix, FEATURE_WARMUP,
};
pub use scaling::{apply_maxabs, fit_maxabs, ScalerState};
pub use stationarity::{ensure_stationary, ColumnStationarity, StationarityReport};

use crate::market_data::CandleSeries;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("insufficient data for {what}: need {needed} values, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular regression: {0}")]
    SingularRegression(String),
    #[error("{split} split has {rows} rows, need at least {needed} (lookback + horizon)")]
    SplitTooShort {
        split: Split,
        rows: usize,
        needed: usize,
    },
    #[error("too few rows ({0}) to split 70/20/10 into non-empty ranges")]
    TooFewRows(usize),
    #[error("feature matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// Everything derived from a candle series that does not depend on the
/// lookback: stationary feature matrix, its report, split boundaries and the
/// train-fitted scaler. Datasets for any lookback come from here, so every
/// lookback sees the same timeline split.
#[derive(Debug, Clone)]
pub struct PreparedFeatures {
    pub matrix: FeatureMatrix,
    pub report: StationarityReport,
    pub splits: SplitRanges,
    pub scaler: ScalerState,
}

impl PreparedFeatures {
    pub fn from_series(series: &CandleSeries, config: &FeatureConfig) -> Result<Self> {
        let raw = assemble_features(series, config)?;
        let (mut matrix, report) = ensure_stationary(&raw, config.max_differencing_rounds)?;
        let splits = split_timeline(matrix.rows())?;
        let scaler = fit_maxabs(&matrix, splits.train.clone())?;
        for (meta, &scale) in matrix.meta.iter_mut().zip(&scaler.scales) {
            meta.scale = scale;
        }
        Ok(PreparedFeatures {
            matrix,
            report,
            splits,
            scaler,
        })
    }

    pub fn dataset(&self, lookback: usize, horizon: usize) -> Result<Dataset> {
        build_sequences(&self.matrix, &self.scaler, lookback, horizon, &self.splits)
    }
}
