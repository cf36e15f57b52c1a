use serde::{Deserialize, Serialize};

use super::{Candle, CandleSeries, MarketDataError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub series: CandleSeries,
    pub inserted: usize,
}

/// Forward-fill missing interval steps.
///
/// Each missing step gets a flat candle at the previous close with zero
/// volume, so its one-step return is exactly zero. A late first candle is
/// left alone since there is nothing to fill from.
pub fn repair_gaps(series: &CandleSeries) -> Result<RepairOutcome> {
    if series.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    let step = series.interval.millis();
    let mut out: Vec<Candle> = Vec::with_capacity(series.len());
    let mut inserted = 0;
    for (i, candle) in series.candles.iter().enumerate() {
        if let Some(prev) = out.last().copied() {
            if candle.open_time == prev.open_time {
                return Err(MarketDataError::Validation {
                    index: i,
                    message: format!("duplicate timestamp {}", candle.open_time),
                });
            }
            if candle.open_time < prev.open_time {
                return Err(MarketDataError::Validation {
                    index: i,
                    message: format!(
                        "timestamp {} precedes previous {}",
                        candle.open_time, prev.open_time
                    ),
                });
            }
            if (candle.open_time - prev.open_time) % step != 0 {
                return Err(MarketDataError::Validation {
                    index: i,
                    message: format!("timestamp {} is off the {} grid", candle.open_time, series.interval),
                });
            }
            let mut t = prev.open_time + step;
            while t < candle.open_time {
                out.push(Candle::flat(t, prev.close));
                inserted += 1;
                t += step;
            }
        }
        out.push(*candle);
    }
    if inserted > 0 {
        log::info!("{}: filled {inserted} missing candle(s)", series.symbol);
    }
    Ok(RepairOutcome {
        series: CandleSeries::new(series.symbol.clone(), series.interval, out),
        inserted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Gap { index: usize, previous_time: i64, time: i64 },
    Duplicate { index: usize, time: i64 },
    Unordered { index: usize, previous_time: i64, time: i64 },
    NonPositivePrice { index: usize },
    NonFinite { index: usize },
    HighLowInconsistent { index: usize },
    NegativeVolume { index: usize },
}

impl Violation {
    pub fn index(&self) -> usize {
        match *self {
            Violation::Gap { index, .. }
            | Violation::Duplicate { index, .. }
            | Violation::Unordered { index, .. }
            | Violation::NonPositivePrice { index }
            | Violation::NonFinite { index }
            | Violation::HighLowInconsistent { index }
            | Violation::NegativeVolume { index } => index,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Report every invariant violation in `series`. Never fails.
pub fn validate_series(series: &CandleSeries) -> ValidationReport {
    let step = series.interval.millis();
    let mut violations = Vec::new();
    for (index, c) in series.candles.iter().enumerate() {
        let prices = [c.open, c.high, c.low, c.close];
        if prices.iter().chain([&c.volume]).any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite { index });
        } else {
            if prices.iter().any(|&p| p <= 0.0) {
                violations.push(Violation::NonPositivePrice { index });
            }
            if c.low > c.open.min(c.close) || c.high < c.open.max(c.close) || c.low > c.high {
                violations.push(Violation::HighLowInconsistent { index });
            }
            if c.volume < 0.0 {
                violations.push(Violation::NegativeVolume { index });
            }
        }
        if index == 0 {
            continue;
        }
        let previous_time = series.candles[index - 1].open_time;
        let time = c.open_time;
        let delta = time - previous_time;
        if delta == 0 {
            violations.push(Violation::Duplicate { index, time });
        } else if delta < 0 {
            violations.push(Violation::Unordered {
                index,
                previous_time,
                time,
            });
        } else if delta != step {
            violations.push(Violation::Gap {
                index,
                previous_time,
                time,
            });
        }
    }
    ValidationReport { violations }
}
