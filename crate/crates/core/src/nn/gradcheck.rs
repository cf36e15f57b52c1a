//! Central finite-difference check of full-model gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::model::{model_backward_raw, model_forward_raw};
use super::{init_model, ModelSpec, ParamStore, Result};
use crate::training::{combined_loss, combined_loss_grad, DEFAULT_EPS_LOSS};

pub const FD_STEP: f64 = 1e-5;
const BATCH: usize = 4;
/// Denominator floor of the relative error, below FD round-off noise for
/// losses of order 1e-3 and above.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_parameter: String,
    pub checked: usize,
    /// Parameters whose ±h probe crossed a ReLU kink, changed a pooling
    /// choice or flipped a prediction sign; their loss is not smooth there.
    pub skipped: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

struct Probe<'a> {
    spec: &'a ModelSpec,
    input: &'a [f64],
    labels: &'a [f64],
}

impl Probe<'_> {
    /// Loss plus the piecewise-linear regime it was evaluated in.
    fn eval(&self, params: &ParamStore) -> Result<(f64, u64, Vec<i8>)> {
        let (pred, cache) = model_forward_raw(self.spec, params, self.input, BATCH)?;
        let loss = combined_loss(&pred, self.labels, DEFAULT_EPS_LOSS).expect("non-empty batch");
        let signs = pred.iter().map(|p| p.partial_cmp(&0.0).map_or(0, |o| o as i8)).collect();
        Ok((loss.loss, cache.kink_signature(), signs))
    }
}

/// Compare the analytic gradient of the combined loss with central
/// differences (`h = 1e-5`) for every parameter, at a seeded random point.
pub fn gradient_check(spec: &ModelSpec, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    let mut params = init_model(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let unit = Uniform::new(-1.0, 1.0).expect("valid range");
    let input: Vec<f64> = (0..BATCH * spec.input_len()).map(|_| unit.sample(&mut rng)).collect();
    let labels: Vec<f64> = (0..BATCH).map(|_| 0.05 * unit.sample(&mut rng)).collect();
    let probe = Probe {
        spec,
        input: &input,
        labels: &labels,
    };

    let (pred, cache) = model_forward_raw(spec, &params, &input, BATCH)?;
    let mut dpred = vec![0.0; BATCH];
    combined_loss_grad(&pred, &labels, DEFAULT_EPS_LOSS, &mut dpred).expect("non-empty batch");
    let analytic = model_backward_raw(spec, &params, &cache, &dpred)?.values().to_vec();
    let (_, base_kinks, base_signs) = probe.eval(&params)?;

    let mut worst = (0.0f64, String::from("-"));
    let (mut checked, mut skipped) = (0, 0);
    for i in 0..params.len() {
        let orig = params.values()[i];
        params.values_mut()[i] = orig + FD_STEP;
        let (up, k_up, s_up) = probe.eval(&params)?;
        params.values_mut()[i] = orig - FD_STEP;
        let (down, k_down, s_down) = probe.eval(&params)?;
        params.values_mut()[i] = orig;
        if k_up != base_kinks || k_down != base_kinks || s_up != base_signs || s_down != base_signs {
            skipped += 1;
            continue;
        }
        checked += 1;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = relative_error(analytic[i], numeric);
        if rel > worst.0 || checked == 1 {
            let (e, k) = params.layout().locate(i).expect("index in layout");
            worst = (rel, format!("{}[{k}]", e.name));
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_parameter: worst.1,
        checked,
        skipped,
        tolerance,
        passed: checked > 0 && worst.0 < tolerance,
    })
}
