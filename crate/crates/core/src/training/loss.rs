use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub mse: f64,
    pub acc: f64,
}

fn check(predictions: &[f64], labels: &[f64]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    Ok(())
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn mse_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check(predictions, labels)?;
    let sum: f64 = predictions.iter().zip(labels).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(sum / predictions.len() as f64)
}

/// `out_i = (2/n)(ŷ_i − y_i)`.
pub fn mse_grad(predictions: &[f64], labels: &[f64], out: &mut [f64]) -> Result<()> {
    check(predictions, labels)?;
    let scale = 2.0 / predictions.len() as f64;
    for ((o, p), y) in out.iter_mut().zip(predictions).zip(labels) {
        *o = scale * (p - y);
    }
    Ok(())
}

/// Mean of `|(sign(y) + sign(ŷ)) / 2|`: 1 for agreeing signs, 0 for opposite
/// signs, 0.5 when exactly one side is zero.
pub fn sign_accuracy(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check(predictions, labels)?;
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| ((sign(y) + sign(p)) / 2.0).abs())
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// `mse / (acc + eps)`.
pub fn combined_loss(predictions: &[f64], labels: &[f64], eps: f64) -> Result<LossValue> {
    let mse = mse_loss(predictions, labels)?;
    let acc = sign_accuracy(predictions, labels)?;
    Ok(LossValue {
        loss: mse / (acc + eps),
        mse,
        acc,
    })
}

/// Loss and its gradient with the accuracy held constant over the batch:
/// `out_i = (2/n)(ŷ_i − y_i) / (acc + eps)`.
pub fn combined_loss_grad(predictions: &[f64], labels: &[f64], eps: f64, out: &mut [f64]) -> Result<LossValue> {
    let value = combined_loss(predictions, labels, eps)?;
    if out.len() != predictions.len() {
        return Err(TrainError::LengthMismatch {
            predictions: out.len(),
            labels: labels.len(),
        });
    }
    mse_grad(predictions, labels, out)?;
    let denom = value.acc + eps;
    out.iter_mut().for_each(|g| *g /= denom);
    Ok(value)
}
