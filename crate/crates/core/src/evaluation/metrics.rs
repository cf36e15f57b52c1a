use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

fn check(predictions: &[f64], labels: &[f64]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Mean of `|y − ŷ|`, in return units (multiply by 100 for percent).
pub fn mean_absolute_error(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check(predictions, labels)?;
    let sum: f64 = predictions.iter().zip(labels).map(|(p, y)| (y - p).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

/// Naive forecast: the mean absolute one-step return over the input window.
pub fn baseline_prediction(window_returns: &[f64]) -> Result<f64> {
    if window_returns.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(window_returns.iter().map(|r| r.abs()).sum::<f64>() / window_returns.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAccuracy {
    /// `None` when no prediction clears the threshold.
    pub accuracy: Option<f64>,
    pub retained: usize,
}

/// Direction accuracy over predictions with `|ŷ| > τ`; a retained pair is
/// correct when `sign(y)·sign(ŷ) > 0`.
pub fn threshold_accuracy(predictions: &[f64], labels: &[f64], threshold: f64) -> Result<ThresholdAccuracy> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(EvalError::InvalidThreshold(threshold));
    }
    let (mut retained, mut correct) = (0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        if p.abs() > threshold {
            retained += 1;
            if p * y > 0.0 {
                correct += 1;
            }
        }
    }
    Ok(ThresholdAccuracy {
        accuracy: (retained > 0).then(|| correct as f64 / retained as f64),
        retained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(mean_absolute_error(&[0.1, -0.2], &[0.1, -0.2]).unwrap(), 0.0);
        assert_eq!(mean_absolute_error(&[-0.01], &[0.01]).unwrap(), 0.02);
        assert!(matches!(mean_absolute_error(&[], &[]), Err(EvalError::EmptyInput)));
        assert!((baseline_prediction(&[0.01, -0.02, 0.03]).unwrap() - 0.02).abs() < 1e-18);
        assert_eq!(baseline_prediction(&[0.0; 4]).unwrap(), 0.0);
        let t = threshold_accuracy(&[0.006, -0.001, 0.008], &[0.004, -0.003, -0.002], 0.005).unwrap();
        assert_eq!(t, ThresholdAccuracy { accuracy: Some(0.5), retained: 2 });
        let t = threshold_accuracy(&[0.006, -0.001], &[0.004, -0.003], 0.01).unwrap();
        assert_eq!(t, ThresholdAccuracy { accuracy: None, retained: 0 });
        assert!(threshold_accuracy(&[0.1], &[0.1], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn retained_count_is_monotone_in_tau(
            pairs in prop::collection::vec((-0.05f64..0.05, -0.05f64..0.05), 1..60),
            a in 0.0f64..0.05,
            b in 0.0f64..0.05,
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (lo, hi) = (a.min(b), a.max(b));
            let r_lo = threshold_accuracy(&p, &y, lo).unwrap();
            let r_hi = threshold_accuracy(&p, &y, hi).unwrap();
            prop_assert!(r_hi.retained <= r_lo.retained);
            prop_assert_eq!(r_lo.accuracy.is_none(), r_lo.retained == 0);
        }

        #[test]
        fn constant_sign_predictor_scores_label_share(
            labels in prop::collection::vec(-0.05f64..0.05, 1..60),
            c in 0.001f64..0.05,
            tau in 0.0f64..0.04,
        ) {
            let p = vec![c; labels.len()];
            let r = threshold_accuracy(&p, &labels, tau).unwrap();
            if let Some(acc) = r.accuracy {
                let share = labels.iter().filter(|&&y| y > 0.0).count() as f64 / labels.len() as f64;
                prop_assert!((acc - share).abs() < 1e-12);
            }
        }

        #[test]
        fn baseline_ignores_signs(w in prop::collection::vec(-0.05f64..0.05, 1..30), flips in prop::collection::vec(any::<bool>(), 30)) {
            let flipped: Vec<f64> = w.iter().zip(&flips).map(|(&r, &f)| if f { -r } else { r }).collect();
            prop_assert_eq!(baseline_prediction(&w).unwrap(), baseline_prediction(&flipped).unwrap());
        }
    }
}
