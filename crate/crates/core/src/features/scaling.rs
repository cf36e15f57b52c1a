use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix, Result};

/// Per-column max-abs scales fitted on one row range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub fit_range: Range<usize>,
    pub scales: Vec<f64>,
}

/// `scale = max |x|` over `fit_range` only; an all-zero column gets scale 1.
pub fn fit_maxabs(matrix: &FeatureMatrix, fit_range: Range<usize>) -> Result<ScalerState> {
    if fit_range.is_empty() || fit_range.end > matrix.rows() {
        return Err(FeatureError::InvalidParameter(format!(
            "fit range {fit_range:?} is empty or outside {} rows",
            matrix.rows()
        )));
    }
    let scales = matrix
        .columns
        .iter()
        .map(|c| {
            let m = c[fit_range.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                1.0
            } else {
                m
            }
        })
        .collect();
    Ok(ScalerState { fit_range, scales })
}

/// Divide each column by its scale. Rows outside the fit range may land outside [−1, 1].
pub fn apply_maxabs(matrix: &FeatureMatrix, state: &ScalerState) -> Result<FeatureMatrix> {
    if state.scales.len() != matrix.width() {
        return Err(FeatureError::InvalidParameter(format!(
            "scaler has {} columns, matrix has {}",
            state.scales.len(),
            matrix.width()
        )));
    }
    let mut out = matrix.clone();
    for ((col, meta), &s) in out.columns.iter_mut().zip(&mut out.meta).zip(&state.scales) {
        col.iter_mut().for_each(|v| *v /= s);
        meta.scale = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ColumnMeta;

    fn matrix(cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = cols[0].len();
        FeatureMatrix {
            times: (0..n as i64).collect(),
            meta: (0..cols.len())
                .map(|i| ColumnMeta {
                    name: format!("c{i}"),
                    differencing_order: 0,
                    scale: 1.0,
                })
                .collect(),
            columns: cols,
            closes: vec![1.0; n],
            returns: vec![0.0; n],
        }
    }

    #[test]
    fn maxabs_examples() {
        let m = matrix(vec![vec![-2.0, 1.0], vec![0.0, 0.0]]);
        let s = fit_maxabs(&m, 0..2).unwrap();
        assert_eq!(s.scales, vec![2.0, 1.0]);
        let out = apply_maxabs(&m, &s).unwrap();
        assert_eq!(out.columns[0], vec![-1.0, 0.5]);
        assert_eq!(out.columns[1], vec![0.0, 0.0]);
        assert_eq!(out.meta[0].scale, 2.0);
    }

    #[test]
    fn fit_on_train_only() {
        let m = matrix(vec![vec![-2.0, 1.0, 4.0]]);
        let s = fit_maxabs(&m, 0..2).unwrap();
        let out = apply_maxabs(&m, &s).unwrap();
        assert_eq!(out.columns[0][2], 2.0);
        assert!(fit_maxabs(&m, 1..1).is_err());
        assert!(fit_maxabs(&m, 0..4).is_err());
    }
}
