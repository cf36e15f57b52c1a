//! Regenerate the synthetic hourly BTC/USDT-like fixture used by the tests.
//!
//! GARCH(1,1) log returns with Student-t(4) shocks, about 0.55% hourly
//! volatility, plus wick and volume noise. A handful of hours are removed to
//! exercise gap repair.
//!
//! ```text
//! cargo run -p candleforge --example synth_fixture -- crates/core/tests/fixtures/btcusdt_1h_synthetic_400d.csv
//! ```

use std::path::PathBuf;

use candleforge::market_data::{save_candles_csv, Candle, CandleSeries, Interval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StudentT};

const SEED: u64 = 20_240_101;
const START_MS: i64 = 1_672_531_200_000; // 2023-01-01T00:00:00Z
const HOURS: usize = 400 * 24;
const START_PRICE: f64 = 27_000.0;
const HOURLY_VOL: f64 = 0.0055;
const DRIFT: f64 = 0.000_02;
const GARCH_ALPHA: f64 = 0.08;
const GARCH_BETA: f64 = 0.90;
const T_DOF: f64 = 4.0;
/// Missing hours (indices into the full grid); 5000/5001 form a two-hour hole.
const DROPPED: [usize; 5] = [1234, 3100, 5000, 5001, 8421];

/// Round to `digits` decimals, landing on the double nearest the decimal.
fn round_to(x: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (x * k).round() / k
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/fixtures/btcusdt_1h_synthetic_400d.csv".into())
        .into();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let shock = StudentT::new(T_DOF).unwrap();
    let t_scale = (T_DOF / (T_DOF - 2.0)).sqrt();
    let wick = Normal::new(0.0, 0.35).unwrap();
    let volume_noise = LogNormal::new(0.0, 0.45).unwrap();

    let var_bar = HOURLY_VOL * HOURLY_VOL;
    let omega = var_bar * (1.0 - GARCH_ALPHA - GARCH_BETA);
    let mut var = var_bar;
    let mut prev_eps = 0.0f64;
    let mut close = START_PRICE;
    let mut candles = Vec::with_capacity(HOURS);
    for i in 0..HOURS {
        var = omega + GARCH_ALPHA * prev_eps * prev_eps + GARCH_BETA * var;
        let sigma = var.sqrt();
        let eps = sigma * shock.sample(&mut rng) / t_scale;
        prev_eps = eps;
        let open = close;
        close = round_to(open * (DRIFT + eps).exp(), 2);
        let up = (sigma * wick.sample(&mut rng)).abs();
        let down = (sigma * wick.sample(&mut rng)).abs();
        let high = round_to(open.max(close) * up.exp(), 2).max(open.max(close));
        let low = round_to(open.min(close) * (-down).exp(), 2).min(open.min(close));
        let activity = (sigma / HOURLY_VOL) * (1.0 + 8.0 * eps.abs());
        let volume = round_to(1_100.0 * activity * volume_noise.sample(&mut rng), 5);
        // keep the stream aligned whether or not this hour is dropped
        let _: f64 = rng.random();
        if DROPPED.contains(&i) {
            continue;
        }
        candles.push(Candle {
            open_time: START_MS + i as i64 * Interval::Hour1.millis(),
            open,
            high,
            low,
            close,
            volume,
        });
    }
    let series = CandleSeries::new("BTCUSDT", Interval::Hour1, candles);
    save_candles_csv(&series, &out).expect("write fixture");
    eprintln!("wrote {} candles to {}", series.len(), out.display());
}
