//! Hourly candlestick forecasting toolkit.
//!
//! - [`market_data`]: exchange klines paging, gap repair, validation, CSV I/O
//! - [`features`]: indicators, ADF stationarity, max-abs scaling, sequence datasets
//! - [`nn`]: dense / conv1d / RNN / LSTM layers with analytic gradients
//! - [`training`]: sign-accuracy-scaled MSE, Adam, epoch loop
//! - [`evaluation`]: MAE vs. naive baseline, threshold accuracy, lookback grid, reports
//! - [`verify`]: gradient checks, ADF calibration and indicator reference checks

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod features;
pub mod market_data;
pub mod nn;
pub mod training;
pub mod evaluation;
pub mod verify;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
