use serde::{Deserialize, Serialize};

use super::adf::{adf_test, CRITICAL_VALUE_5PCT};
use super::indicators::difference;
use super::{FeatureError, FeatureMatrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStationarity {
    pub name: String,
    /// Statistic of the final test; `None` when the column was excluded.
    pub t_statistic: Option<f64>,
    pub lags_used: Option<usize>,
    pub critical_value_5pct: f64,
    pub stationary: bool,
    pub differencing_applied: usize,
    pub excluded: bool,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub columns: Vec<ColumnStationarity>,
    /// Leading rows dropped so differenced columns share one time range.
    pub rows_trimmed: usize,
}

impl StationarityReport {
    pub fn column(&self, name: &str) -> Option<&ColumnStationarity> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// ADF-test each column and difference the ones that fail, up to
/// `max_rounds` times. Columns still failing are kept and flagged; zero
/// variance columns are dropped with a warning. The result is trimmed to the
/// rows where every kept column is defined.
pub fn ensure_stationary(matrix: &FeatureMatrix, max_rounds: usize) -> Result<(FeatureMatrix, StationarityReport)> {
    matrix.validate()?;
    let mut kept: Vec<(usize, Vec<f64>, usize)> = Vec::new();
    let mut report = Vec::with_capacity(matrix.width());

    for (index, (values, meta)) in matrix.columns.iter().zip(&matrix.meta).enumerate() {
        let mut current = values.clone();
        let mut order = meta.differencing_order;
        let mut applied = 0;
        let entry = loop {
            match adf_test(&current, None) {
                Ok(r) if r.stationary || applied == max_rounds => {
                    let warning = (!r.stationary).then(|| {
                        log::warn!(
                            "column {} still non-stationary after {applied} differencing round(s) (t = {:.3})",
                            meta.name,
                            r.t_statistic
                        );
                        format!("non-stationary after {applied} differencing round(s)")
                    });
                    kept.push((index, std::mem::take(&mut current), order));
                    break ColumnStationarity {
                        name: meta.name.clone(),
                        t_statistic: Some(r.t_statistic),
                        lags_used: Some(r.lags_used),
                        critical_value_5pct: r.critical_value_5pct,
                        stationary: r.stationary,
                        differencing_applied: applied,
                        excluded: false,
                        warning,
                    };
                }
                Ok(_) => {
                    current = difference(&current)?;
                    applied += 1;
                    order += 1;
                }
                Err(FeatureError::SingularRegression(why)) => {
                    log::warn!("column {} excluded: {why}", meta.name);
                    break ColumnStationarity {
                        name: meta.name.clone(),
                        t_statistic: None,
                        lags_used: None,
                        critical_value_5pct: CRITICAL_VALUE_5PCT,
                        stationary: false,
                        differencing_applied: applied,
                        excluded: true,
                        warning: Some(format!("excluded: {why}")),
                    };
                }
                Err(e) => return Err(e),
            }
        };
        report.push(entry);
    }

    if kept.is_empty() {
        return Err(FeatureError::Domain("every feature column was excluded".into()));
    }
    let n = matrix.rows();
    let trim = kept.iter().map(|(_, v, _)| n - v.len()).max().unwrap_or(0);
    let mut out = matrix.clone();
    out.trim_front(trim);
    out.columns.clear();
    out.meta.clear();
    for (index, values, order) in kept {
        let offset = values.len() - (n - trim);
        out.columns.push(values[offset..].to_vec());
        let mut meta = matrix.meta[index].clone();
        meta.differencing_order = order;
        out.meta.push(meta);
    }
    out.validate()?;
    Ok((
        out,
        StationarityReport {
            columns: report,
            rows_trimmed: trim,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ColumnMeta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn matrix(cols: Vec<(&str, Vec<f64>)>) -> FeatureMatrix {
        let n = cols[0].1.len();
        FeatureMatrix {
            times: (0..n as i64).collect(),
            meta: cols
                .iter()
                .map(|(name, _)| ColumnMeta {
                    name: name.to_string(),
                    differencing_order: 0,
                    scale: 1.0,
                })
                .collect(),
            columns: cols.into_iter().map(|(_, v)| v).collect(),
            closes: vec![1.0; n],
            returns: vec![0.0; n],
        }
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn cumsum(v: &[f64]) -> Vec<f64> {
        v.iter()
            .scan(0.0, |a, x| {
                *a += x;
                Some(*a)
            })
            .collect()
    }

    #[test]
    fn stationary_matrix_is_untouched() {
        let m = matrix(vec![("a", noise(1, 400)), ("b", noise(2, 400))]);
        let (out, report) = ensure_stationary(&m, 2).unwrap();
        assert_eq!(out, m);
        assert_eq!(report.rows_trimmed, 0);
        assert!(report.columns.iter().all(|c| c.stationary && c.differencing_applied == 0));
    }

    #[test]
    fn random_walk_column_is_differenced_and_rows_aligned() {
        let walk = cumsum(&noise(3, 400));
        let m = matrix(vec![("noise", noise(4, 400)), ("walk", walk.clone())]);
        let (out, report) = ensure_stationary(&m, 2).unwrap();
        assert_eq!(report.column("walk").unwrap().differencing_applied, 1);
        assert_eq!(out.meta[1].differencing_order, 1);
        assert_eq!(report.rows_trimmed, 1);
        assert_eq!(out.rows(), 399);
        assert_eq!(out.times[0], 1);
        assert_eq!(out.columns[0], m.columns[0][1..]);
        assert_eq!(out.columns[1][0], walk[1] - walk[0]);
        for c in &report.columns {
            assert_eq!(c.stationary, c.t_statistic.unwrap() < c.critical_value_5pct);
        }
    }

    #[test]
    fn zero_variance_column_is_excluded() {
        let m = matrix(vec![("noise", noise(5, 300)), ("flat", vec![2.0; 300])]);
        let (out, report) = ensure_stationary(&m, 2).unwrap();
        assert_eq!(out.names(), vec!["noise"]);
        let flat = report.column("flat").unwrap();
        assert!(flat.excluded && flat.warning.is_some());
    }
}
