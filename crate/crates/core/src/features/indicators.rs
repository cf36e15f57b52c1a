//! Technical indicators over price series.
//!
//! Every indicator returns an [`IndicatorSeries`]: the defined values plus the
//! index of the first one. Indices before `start` are warm-up and have no value.

use super::{FeatureError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    /// Index (in the input series) of the first defined value.
    pub start: usize,
    pub values: Vec<f64>,
}

impl IndicatorSeries {
    /// Length of the input series this indicator was computed on.
    pub fn input_len(&self) -> usize {
        self.start + self.values.len()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        index
            .checked_sub(self.start)
            .and_then(|i| self.values.get(i).copied())
    }

    /// Values from input index `from` onwards. `from` must not precede `start`.
    pub fn from_index(&self, from: usize) -> &[f64] {
        &self.values[from - self.start..]
    }
}

fn require(what: &'static str, needed: usize, got: usize) -> Result<()> {
    if got < needed {
        Err(FeatureError::InsufficientData { what, needed, got })
    } else {
        Ok(())
    }
}

fn check_period(period: usize) -> Result<()> {
    if period == 0 {
        Err(FeatureError::InvalidParameter("period must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Exponential moving average with `α = 2/(period+1)`, seeded with the simple
/// mean of the first `period` values at index `period − 1`.
pub fn ema(values: &[f64], period: usize) -> Result<IndicatorSeries> {
    check_period(period)?;
    require("ema", period, values.len())?;
    let alpha = 2.0 / (period as f64 + 1.0);
    let seed = values[..period].iter().sum::<f64>() / period as f64;
    let mut out = Vec::with_capacity(values.len() - period + 1);
    out.push(seed);
    let mut prev = seed;
    for &x in &values[period..] {
        prev += alpha * (x - prev);
        out.push(prev);
    }
    Ok(IndicatorSeries {
        start: period - 1,
        values: out,
    })
}

/// Trailing simple moving average.
pub fn sma(values: &[f64], period: usize) -> Result<IndicatorSeries> {
    check_period(period)?;
    require("sma", period, values.len())?;
    let out = values
        .windows(period)
        .map(|w| w.iter().sum::<f64>() / period as f64)
        .collect();
    Ok(IndicatorSeries {
        start: period - 1,
        values: out,
    })
}

pub const MACD_FAST: usize = 12;
pub const MACD_SLOW: usize = 26;
pub const MACD_SIGNAL: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub line: IndicatorSeries,
    pub signal: IndicatorSeries,
}

/// MACD line (EMA12 − EMA26) and its 9-period EMA signal.
pub fn macd(close: &[f64]) -> Result<Macd> {
    require("macd", MACD_SLOW + MACD_SIGNAL, close.len())?;
    let fast = ema(close, MACD_FAST)?;
    let slow = ema(close, MACD_SLOW)?;
    let line_values: Vec<f64> = slow
        .values
        .iter()
        .zip(fast.from_index(slow.start))
        .map(|(s, f)| f - s)
        .collect();
    let line = IndicatorSeries {
        start: slow.start,
        values: line_values,
    };
    let sig = ema(&line.values, MACD_SIGNAL)?;
    let signal = IndicatorSeries {
        start: line.start + sig.start,
        values: sig.values,
    };
    Ok(Macd { line, signal })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stochastic {
    pub k: IndicatorSeries,
    pub d: IndicatorSeries,
}

/// Stochastic oscillator. A flat window (highest high == lowest low) gives %K = 50.
pub fn stochastic_kd(
    high: &[f64],
    low: &[f64],
    close: &[f64],
    k_period: usize,
    d_period: usize,
) -> Result<Stochastic> {
    check_period(k_period)?;
    check_period(d_period)?;
    if high.len() != close.len() || low.len() != close.len() {
        return Err(FeatureError::InvalidParameter(
            "high, low and close must have equal lengths".into(),
        ));
    }
    require("stochastic", k_period + d_period - 1, close.len())?;
    let k_values: Vec<f64> = (k_period - 1..close.len())
        .map(|t| {
            let window = t + 1 - k_period..=t;
            let hh = high[window.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ll = low[window].iter().copied().fold(f64::INFINITY, f64::min);
            if hh == ll {
                50.0
            } else {
                100.0 * (close[t] - ll) / (hh - ll)
            }
        })
        .collect();
    let d = sma(&k_values, d_period)?;
    let k = IndicatorSeries {
        start: k_period - 1,
        values: k_values,
    };
    let d = IndicatorSeries {
        start: k.start + d.start,
        values: d.values,
    };
    Ok(Stochastic { k, d })
}

/// Relative strength index with Wilder smoothing.
///
/// A window with neither gains nor losses is neutral (50); no losses gives
/// 100 and no gains gives 0.
pub fn rsi(close: &[f64], period: usize) -> Result<IndicatorSeries> {
    check_period(period)?;
    require("rsi", period + 1, close.len())?;
    let p = period as f64;
    let change = |t: usize| close[t] - close[t - 1];
    let mut avg_gain = (1..=period).map(|t| change(t).max(0.0)).sum::<f64>() / p;
    let mut avg_loss = (1..=period).map(|t| (-change(t)).max(0.0)).sum::<f64>() / p;
    let mut out = Vec::with_capacity(close.len() - period);
    out.push(rsi_value(avg_gain, avg_loss));
    for t in period + 1..close.len() {
        let c = change(t);
        avg_gain = (avg_gain * (p - 1.0) + c.max(0.0)) / p;
        avg_loss = (avg_loss * (p - 1.0) + (-c).max(0.0)) / p;
        out.push(rsi_value(avg_gain, avg_loss));
    }
    Ok(IndicatorSeries {
        start: period,
        values: out,
    })
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// One-step fractional returns `(c_t − c_{t−1}) / c_{t−1}`; index 0 is undefined.
pub fn compute_returns(close: &[f64]) -> Result<IndicatorSeries> {
    require("returns", 2, close.len())?;
    if let Some(i) = close.iter().position(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(FeatureError::Domain(format!(
            "close price at index {i} is {} (must be positive)",
            close[i]
        )));
    }
    let values = close.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    Ok(IndicatorSeries { start: 1, values })
}

/// First difference; the output is one shorter than the input.
pub fn difference(values: &[f64]) -> Result<Vec<f64>> {
    require("difference", 2, values.len())?;
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ema_constant_and_seed() {
        let e = ema(&[5.0; 40], 12).unwrap();
        assert_eq!(e.start, 11);
        assert!(e.values.iter().all(|&v| v == 5.0));
        let e = ema(&[1.0, 3.0], 2).unwrap();
        assert_eq!(e.get(1), Some(2.0));
        assert_eq!(e.get(0), None);
        assert!(matches!(
            ema(&[1.0], 2),
            Err(FeatureError::InsufficientData { .. })
        ));
    }

    #[test]
    fn sma_small() {
        let s = sma(&[1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!((s.start, s.values.clone()), (2, vec![2.0]));
        assert!(sma(&[7.0; 20], 5).unwrap().values.iter().all(|&v| v == 7.0));
        assert!(sma(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn macd_warmup_and_signs() {
        let m = macd(&[42.0; 60]).unwrap();
        assert_eq!(m.line.start, 25);
        assert_eq!(m.signal.start, 33);
        assert!(m.line.values.iter().chain(&m.signal.values).all(|&v| v == 0.0));

        let rising: Vec<f64> = (0..200).map(|i| 100.0 + i as f64).collect();
        let m = macd(&rising).unwrap();
        assert!(m.line.values.iter().all(|&v| v > 0.0));
        assert!(macd(&rising[..34]).is_err());
    }

    #[test]
    fn stochastic_extremes() {
        // close at the window high, low and a flat window
        let high = [10.0, 11.0, 12.0, 12.0, 12.0];
        let low = [9.0, 9.5, 12.0, 12.0, 12.0];
        let close = [9.5, 11.0, 12.0, 12.0, 12.0];
        let s = stochastic_kd(&high, &low, &close, 3, 1).unwrap();
        assert_eq!(s.k.start, 2);
        assert_eq!(s.k.values[0], 100.0);
        assert_eq!(s.k.values[2], 50.0);
        let close_low = [9.5, 11.0, 9.0];
        let s = stochastic_kd(&high[..3], &[9.0, 9.0, 9.0], &close_low, 3, 1).unwrap();
        assert_eq!(s.k.values[0], 0.0);
        assert!(stochastic_kd(&high, &low, &close, 4, 3).is_err());
    }

    #[test]
    fn rsi_monotone_and_flat() {
        let up: Vec<f64> = (0..50).map(|i| 10.0 + i as f64).collect();
        assert!(rsi(&up, 14).unwrap().values.iter().all(|&v| v == 100.0));
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(rsi(&down, 14).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(rsi(&[3.0; 30], 14).unwrap().values.iter().all(|&v| v == 50.0));
        assert!(rsi(&up[..14], 14).is_err());
    }

    #[test]
    fn returns_examples() {
        let r = compute_returns(&[100.0, 102.0, 101.0]).unwrap();
        assert_eq!(r.start, 1);
        assert_eq!(r.values[0], 0.02);
        assert!((r.values[1] - (-0.00980392156862745)).abs() < 1e-15);
        assert!(compute_returns(&[5.0; 10]).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(
            compute_returns(&[1.0, 0.0]),
            Err(FeatureError::Domain(_))
        ));
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 4.0, 9.0]).unwrap(), vec![3.0, 5.0]);
        assert_eq!(difference(&[2.0; 4]).unwrap(), vec![0.0; 3]);
        let x = [0.5, -1.25, 3.0, 0.125];
        let cumsum: Vec<f64> = std::iter::once(0.0)
            .chain(x.iter().scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            }))
            .collect();
        assert_eq!(difference(&cumsum).unwrap(), x);
        assert!(difference(&[1.0]).is_err());
    }
}
