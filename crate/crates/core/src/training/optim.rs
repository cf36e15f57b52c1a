use super::{Result, TrainConfig, TrainError};

/// Scale `grads` so their global L2 norm is at most `clip_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [f64], clip_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > clip_norm {
        let s = clip_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(TrainError::LengthMismatch {
            predictions: params.len(),
            labels: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::Diverged(format!("non-finite gradient at parameter {i}")));
    }
    let (b1, b2) = (config.beta1, config.beta2);
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn clipping_examples() {
        let mut g = [0.3, 0.4];
        assert_eq!(clip_gradients(&mut g, 1.0), 0.5);
        assert_eq!(g, [0.3, 0.4]);
        let mut g = [3.0, 4.0];
        clip_gradients(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = [0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, &cfg(0.01)).unwrap();
        assert_eq!(p[0], -0.01 * 1.0 / (1.0 + 1e-8));
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = [0.25, -3.0, 0.0];
        let before = p;
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, &cfg(0.1)).unwrap();
        assert_eq!(p.map(f64::to_bits), before.map(f64::to_bits));
    }

    #[test]
    fn nan_gradient_is_divergence() {
        let mut p = [0.0];
        let mut s = AdamState::new(1);
        assert!(matches!(
            adam_step(&mut p, &[f64::NAN], &mut s, &cfg(0.1)),
            Err(TrainError::Diverged(_))
        ));
    }
}
