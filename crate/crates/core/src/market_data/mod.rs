//! Candlestick ingestion: exchange paging, gap repair, validation and CSV persistence.

mod client;
mod csv_io;
mod repair;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{ApiCredentials, KlineClient, DEFAULT_BASE_URL, PAGE_SIZE};
pub use csv_io::{load_candles_csv, save_candles_csv, write_candles_csv};
pub use repair::{repair_gaps, validate_series, RepairOutcome, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected by exchange (HTTP {status}): {message}")]
    Config { status: u16, message: String },
    #[error("no candles returned for {symbol} in [{start}, {end})")]
    DataUnavailable { symbol: String, start: i64, end: i64 },
    #[error("malformed exchange response: {0}")]
    Response(String),
    #[error("invalid fetch range: {0}")]
    InvalidRange(String),
    #[error("unsupported interval `{0}`")]
    UnknownInterval(String),
    #[error("validation error at index {index}: {message}")]
    Validation { index: usize, message: String },
    #[error("series is empty")]
    EmptySeries,
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MarketDataError>;

/// Candle duration. Only the exchange's common kline intervals are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interval {
    #[serde(rename = "1m")]
    Minute1,
    #[serde(rename = "5m")]
    Minute5,
    #[serde(rename = "15m")]
    Minute15,
    #[serde(rename = "1h")]
    Hour1,
    #[serde(rename = "4h")]
    Hour4,
    #[serde(rename = "1d")]
    Day1,
}

impl Interval {
    pub const ALL: [Interval; 6] = [
        Interval::Minute1,
        Interval::Minute5,
        Interval::Minute15,
        Interval::Hour1,
        Interval::Hour4,
        Interval::Day1,
    ];

    pub fn millis(self) -> i64 {
        const MINUTE: i64 = 60_000;
        match self {
            Interval::Minute1 => MINUTE,
            Interval::Minute5 => 5 * MINUTE,
            Interval::Minute15 => 15 * MINUTE,
            Interval::Hour1 => 60 * MINUTE,
            Interval::Hour4 => 240 * MINUTE,
            Interval::Day1 => 1440 * MINUTE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Interval::Minute1 => "1m",
            Interval::Minute5 => "5m",
            Interval::Minute15 => "15m",
            Interval::Hour1 => "1h",
            Interval::Hour4 => "4h",
            Interval::Day1 => "1d",
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Interval {
    type Err = MarketDataError;

    fn from_str(s: &str) -> Result<Self> {
        Interval::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| MarketDataError::UnknownInterval(s.to_string()))
    }
}

/// One OHLCV bar. `open_time` is epoch milliseconds (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub open_time: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    /// Synthetic bar used to fill a missing step: flat at `price`, zero volume.
    pub fn flat(open_time: i64, price: f64) -> Self {
        Candle {
            open_time,
            open: price,
            high: price,
            low: price,
            close: price,
            volume: 0.0,
        }
    }
}

/// Ordered candles of one symbol at one interval.
///
/// A series straight from the exchange may contain gaps; after
/// [`repair_gaps`] consecutive `open_time`s differ by exactly one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandleSeries {
    pub symbol: String,
    pub interval: Interval,
    pub candles: Vec<Candle>,
}

impl CandleSeries {
    pub fn new(symbol: impl Into<String>, interval: Interval, candles: Vec<Candle>) -> Self {
        CandleSeries {
            symbol: symbol.into(),
            interval,
            candles,
        }
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.close).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.low).collect()
    }

    pub fn times(&self) -> Vec<i64> {
        self.candles.iter().map(|c| c.open_time).collect()
    }
}

/// Half-open time window `[start, end)` to request from the exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchRange {
    pub start: i64,
    pub end: i64,
    pub interval: Interval,
}

impl FetchRange {
    pub fn new(start: i64, end: i64, interval: Interval) -> Result<Self> {
        if start >= end {
            return Err(MarketDataError::InvalidRange(format!(
                "start {start} must be before end {end}"
            )));
        }
        Ok(FetchRange {
            start,
            end,
            interval,
        })
    }

    /// The `days` whole days ending at `end`, with `end` floored to the interval grid.
    pub fn last_days(end: i64, days: u32, interval: Interval) -> Result<Self> {
        let end = end - end.rem_euclid(interval.millis());
        FetchRange::new(end - i64::from(days) * 86_400_000, end, interval)
    }

    /// Number of interval steps whose open time falls in the range.
    pub fn expected_steps(&self) -> i64 {
        let step = self.interval.millis();
        let first = self.start + (step - self.start.rem_euclid(step)) % step;
        if first >= self.end {
            0
        } else {
            (self.end - 1 - first) / step + 1
        }
    }
}
