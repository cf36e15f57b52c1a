//! Self-checks behind the `verify` command: indicator reference
//! implementations, ADF size/power by simulation, finite-difference gradient
//! checks, loss identities and split arithmetic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{adf_test, indicators, split_timeline};
use crate::nn::{gradient_check, ModelKind, ModelSpec};
use crate::training::{combined_loss, mse_loss, sign_accuracy, DEFAULT_EPS_LOSS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub adf_trials: usize,
    pub adf_length: usize,
    pub metric_cases: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            adf_trials: 1000,
            adf_length: 500,
            metric_cases: 10_000,
        }
    }
}

pub fn run_all(options: &VerifyOptions) -> VerifyReport {
    let suites = vec![
        indicator_suite(options.seed),
        adf_suite(options.seed, options.adf_trials, options.adf_length),
        gradient_suite(options.seed),
        metric_suite(options.seed, options.metric_cases),
        split_suite(),
    ];
    VerifyReport {
        seed: options.seed,
        suites,
    }
}

/// Straightforward per-index reimplementations; `None` marks warm-up.
pub mod reference {
    pub fn sma(x: &[f64], p: usize) -> Vec<Option<f64>> {
        (0..x.len())
            .map(|t| {
                if t + 1 < p {
                    return None;
                }
                let mut s = 0.0;
                for v in &x[t + 1 - p..=t] {
                    s += v;
                }
                Some(s / p as f64)
            })
            .collect()
    }

    pub fn ema(x: &[f64], p: usize) -> Vec<Option<f64>> {
        let a = 2.0 / (p as f64 + 1.0);
        let mut out = vec![None; x.len()];
        if x.len() < p {
            return out;
        }
        let mut e = x[..p].iter().sum::<f64>() / p as f64;
        out[p - 1] = Some(e);
        for t in p..x.len() {
            e = a * x[t] + (1.0 - a) * e;
            out[t] = Some(e);
        }
        out
    }

    /// MACD line and signal, with the signal EMA seeded on the first
    /// `signal` defined line values.
    pub fn macd(x: &[f64]) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
        let (fast, slow) = (ema(x, 12), ema(x, 26));
        let line: Vec<Option<f64>> = fast.iter().zip(&slow).map(|(f, s)| Some((*f)? - (*s)?)).collect();
        let first = line.iter().position(Option::is_some).unwrap_or(x.len());
        let defined: Vec<f64> = line[first..].iter().map(|v| v.unwrap()).collect();
        let mut signal = vec![None; first];
        signal.extend(ema(&defined, 9));
        (line, signal)
    }

    pub fn stochastic(h: &[f64], l: &[f64], c: &[f64], k: usize, d: usize) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
        let mut pk = vec![None; c.len()];
        for t in k - 1..c.len() {
            let mut hh = h[t];
            let mut ll = l[t];
            for j in t + 1 - k..=t {
                if h[j] > hh {
                    hh = h[j];
                }
                if l[j] < ll {
                    ll = l[j];
                }
            }
            pk[t] = Some(if hh == ll { 50.0 } else { 100.0 * (c[t] - ll) / (hh - ll) });
        }
        let mut pd = vec![None; c.len()];
        for t in k + d - 2..c.len() {
            let mut s = 0.0;
            for v in &pk[t + 1 - d..=t] {
                s += v.unwrap();
            }
            pd[t] = Some(s / d as f64);
        }
        (pk, pd)
    }

    pub fn rsi(c: &[f64], p: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; c.len()];
        if c.len() < p + 1 {
            return out;
        }
        let (mut g, mut l) = (0.0, 0.0);
        for t in 1..=p {
            let d = c[t] - c[t - 1];
            if d > 0.0 {
                g += d;
            } else {
                l -= d;
            }
        }
        g /= p as f64;
        l /= p as f64;
        let value = |g: f64, l: f64| {
            if l == 0.0 && g == 0.0 {
                50.0
            } else if l == 0.0 {
                100.0
            } else if g == 0.0 {
                0.0
            } else {
                100.0 * g / (g + l)
            }
        };
        out[p] = Some(value(g, l));
        for t in p + 1..c.len() {
            let d = c[t] - c[t - 1];
            let (up, down) = if d > 0.0 { (d, 0.0) } else { (0.0, -d) };
            g = (g * (p as f64 - 1.0) + up) / p as f64;
            l = (l * (p as f64 - 1.0) + down) / p as f64;
            out[t] = Some(value(g, l));
        }
        out
    }
}

/// Largest absolute difference over indices where both sides are defined;
/// `None` when the warm-up patterns disagree.
fn max_diff(got: &indicators::IndicatorSeries, want: &[Option<f64>]) -> Option<f64> {
    let mut worst = 0.0f64;
    for (t, w) in want.iter().enumerate() {
        match (got.get(t), w) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            _ => return None,
        }
    }
    Some(worst)
}

/// Random OHLC fixture: a positive random walk with wicks.
pub fn random_ohlc(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 0.01).expect("valid sigma");
    let wick = Uniform::new(0.0, 0.005).expect("valid range");
    let mut close = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    let mut low = Vec::with_capacity(n);
    let mut price = 100.0f64;
    for _ in 0..n {
        price *= f64::exp(step.sample(&mut rng));
        close.push(price);
        high.push(price * (1.0 + wick.sample(&mut rng)));
        low.push(price * (1.0 - wick.sample(&mut rng)));
    }
    (high, low, close)
}

pub fn indicator_suite(seed: u64) -> SuiteResult {
    const TOL: f64 = 1e-12;
    let (high, low, close) = random_ohlc(seed, 1000);
    let mut diffs: Vec<(&str, Option<f64>)> = Vec::new();
    diffs.push(("ema12", indicators::ema(&close, 12).ok().and_then(|s| max_diff(&s, &reference::ema(&close, 12)))));
    diffs.push(("sma12", indicators::sma(&close, 12).ok().and_then(|s| max_diff(&s, &reference::sma(&close, 12)))));
    diffs.push(("rsi14", indicators::rsi(&close, 14).ok().and_then(|s| max_diff(&s, &reference::rsi(&close, 14)))));
    let (line, signal) = reference::macd(&close);
    let got = indicators::macd(&close).ok();
    diffs.push(("macd_line", got.as_ref().and_then(|m| max_diff(&m.line, &line))));
    diffs.push(("macd_signal", got.as_ref().and_then(|m| max_diff(&m.signal, &signal))));
    let (k, d) = reference::stochastic(&high, &low, &close, 14, 3);
    let got = indicators::stochastic_kd(&high, &low, &close, 14, 3).ok();
    diffs.push(("stoch_k", got.as_ref().and_then(|s| max_diff(&s.k, &k))));
    diffs.push(("stoch_d", got.as_ref().and_then(|s| max_diff(&s.d, &d))));
    let passed = diffs.iter().all(|(_, d)| d.is_some_and(|v| v < TOL));
    let detail = diffs
        .iter()
        .map(|(n, d)| match d {
            Some(v) => format!("{n} {v:.2e}"),
            None => format!("{n} warm-up mismatch"),
        })
        .collect::<Vec<_>>()
        .join(", ");
    SuiteResult {
        name: "indicator oracles (max abs diff < 1e-12)".into(),
        passed,
        detail,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfCalibration {
    /// Share of unit-root series declared stationary (test size).
    pub random_walk_rate: f64,
    /// Share of iid series declared stationary (test power).
    pub iid_rate: f64,
}

/// Stationary-verdict rates of the ADF test over seeded random walks and iid
/// Gaussian series. Trial `i` draws from its own stream, so results do not
/// depend on thread scheduling.
pub fn adf_calibration(seed: u64, trials: usize, length: usize) -> AdfCalibration {
    let rate = |walk: bool| {
        let hits: usize = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 * i as u64 + walk as u64);
                let mut level = 0.0;
                let series: Vec<f64> = (0..length)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        if walk {
                            level += e;
                            level
                        } else {
                            e
                        }
                    })
                    .collect();
                adf_test(&series, None).map_or(0, |r| r.stationary as usize)
            })
            .sum();
        hits as f64 / trials as f64
    };
    AdfCalibration {
        random_walk_rate: rate(true),
        iid_rate: rate(false),
    }
}

pub fn adf_suite(seed: u64, trials: usize, length: usize) -> SuiteResult {
    let c = adf_calibration(seed, trials, length);
    SuiteResult {
        name: format!("ADF calibration ({trials} trials, length {length})"),
        passed: (0.02..=0.09).contains(&c.random_walk_rate) && c.iid_rate >= 0.95,
        detail: format!(
            "random walks stationary {:.1}% (want 2-9%), iid stationary {:.1}% (want >= 95%)",
            100.0 * c.random_walk_rate,
            100.0 * c.iid_rate
        ),
    }
}

pub fn gradient_suite(seed: u64) -> SuiteResult {
    let mut details = Vec::new();
    let mut passed = true;
    for kind in ModelKind::ALL {
        let spec = ModelSpec::new(kind, 8, 3).expect("valid spec");
        match gradient_check(&spec, seed, 1e-4) {
            Ok(r) => {
                passed &= r.passed;
                details.push(format!(
                    "{kind} max rel {:.2e} at {} ({} checked, {} skipped)",
                    r.max_rel_error, r.worst_parameter, r.checked, r.skipped
                ));
            }
            Err(e) => {
                passed = false;
                details.push(format!("{kind} error: {e}"));
            }
        }
    }
    SuiteResult {
        name: "gradient checks (L=8, F=3, rel err < 1e-4)".into(),
        passed,
        detail: details.join("; "),
    }
}

pub fn metric_suite(seed: u64, cases: usize) -> SuiteResult {
    let eps = DEFAULT_EPS_LOSS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new(-0.05, 0.05).expect("valid range");
    let mut failures = Vec::new();
    for case in 0..cases {
        let n = 1 + case % 64;
        let y: Vec<f64> = (0..n).map(|_| u.sample(&mut rng)).collect();
        let p: Vec<f64> = (0..n).map(|_| u.sample(&mut rng)).collect();
        let acc = sign_accuracy(&p, &y).expect("non-empty");
        let loss = combined_loss(&p, &y, eps).expect("non-empty");
        if !(0.0..=1.0).contains(&acc) || loss.loss != mse_loss(&p, &y).expect("non-empty") / (acc + eps) {
            failures.push(format!("random case {case}"));
        }
        let same: Vec<f64> = y.iter().map(|v| v * 1.5).collect();
        let v = combined_loss(&same, &y, eps).expect("non-empty");
        let all_nonzero = y.iter().all(|&v| v != 0.0);
        if all_nonzero && (v.acc != 1.0 || v.loss != v.mse / (1.0 + eps)) {
            failures.push(format!("same-sign case {case}"));
        }
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        let v = combined_loss(&flipped, &y, eps).expect("non-empty");
        if all_nonzero && (v.acc != 0.0 || v.loss != v.mse / eps) {
            failures.push(format!("flipped case {case}"));
        }
    }
    SuiteResult {
        name: format!("loss identities ({cases} random cases)"),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "acc in [0,1]; perfect-sign acc=1, flipped acc=0; loss == mse/(acc+eps)".into()
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    }
}

pub fn split_suite() -> SuiteResult {
    let mut details = Vec::new();
    let mut passed = true;
    for n in [10usize, 400, 9600] {
        match split_timeline(n) {
            Ok(s) => {
                let ok = s.train == (0..n * 7 / 10) && s.val == (n * 7 / 10..n * 9 / 10) && s.test == (n * 9 / 10..n);
                passed &= ok;
                details.push(format!("N={n}: {}/{}/{}", s.train.len(), s.val.len(), s.test.len()));
            }
            Err(e) => {
                passed = false;
                details.push(format!("N={n}: {e}"));
            }
        }
    }
    SuiteResult {
        name: "split boundaries (floor 70/20/10)".into(),
        passed,
        detail: details.join(", "),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_suites_pass() {
        assert!(indicator_suite(3).passed, "{:?}", indicator_suite(3));
        assert!(metric_suite(3, 500).passed);
        assert!(split_suite().passed);
    }

    #[test]
    fn reference_matches_hand_examples() {
        assert_eq!(reference::ema(&[1.0, 3.0], 2), vec![None, Some(2.0)]);
        assert_eq!(reference::sma(&[1.0, 2.0, 3.0], 3), vec![None, None, Some(2.0)]);
        let up: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(reference::rsi(&up, 14)[14..].iter().all(|v| *v == Some(100.0)));
    }
}
