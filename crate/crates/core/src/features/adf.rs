//! Augmented Dickey–Fuller unit-root test with constant and linear trend.
//!
//! Regression, with `p` lagged differences:
//!
//! ```text
//! Δy_t = α + β·t + γ·y_{t−1} + Σ_{i=1..p} δ_i·Δy_{t−i} + ε_t
//! ```
//!
//! fitted by Householder QR. The statistic is `γ̂ / se(γ̂)`.

use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};

/// Asymptotic 5% critical value for the constant + trend specification.
pub const CRITICAL_VALUE_5PCT: f64 = -3.41;

/// Minimum series length on top of the lag order.
const MIN_LEN_OVER_LAGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub t_statistic: f64,
    pub lags_used: usize,
    pub nobs: usize,
    pub critical_value_5pct: f64,
    pub stationary: bool,
}

/// Schwert's rule `floor(12·(n/100)^(1/4))`.
pub fn schwert_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

pub fn adf_test(series: &[f64], max_lag: Option<usize>) -> Result<AdfResult> {
    let n = series.len();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::Domain("ADF input contains non-finite values".into()));
    }
    let lags = max_lag.unwrap_or_else(|| schwert_lag(n));
    if n < MIN_LEN_OVER_LAGS + lags {
        return Err(FeatureError::InsufficientData {
            what: "adf",
            needed: MIN_LEN_OVER_LAGS + lags,
            got: n,
        });
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(FeatureError::SingularRegression("series has zero variance".into()));
    }

    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let nobs = dy.len() - lags;
    // columns: const, trend, lagged differences, then y_{t−1} last so that
    // its standard error is read straight off the last diagonal of R
    let k = 3 + lags;
    let mut x = vec![0.0; nobs * k];
    let mut target = vec![0.0; nobs];
    for r in 0..nobs {
        let j = r + lags;
        let col = |c: usize| c * nobs + r;
        x[col(0)] = 1.0;
        x[col(1)] = (r + 1) as f64;
        for i in 1..=lags {
            x[col(1 + i)] = dy[j - i];
        }
        x[col(k - 1)] = series[j];
        target[r] = dy[j];
    }

    let fit = least_squares(&mut x, &mut target, nobs, k)?;
    let dof = (nobs - k) as f64;
    let sigma2 = fit.rss / dof;
    if !(sigma2 > 0.0) {
        return Err(FeatureError::SingularRegression("regression fits exactly".into()));
    }
    let se = (sigma2 / (fit.r_diag_last * fit.r_diag_last)).sqrt();
    let t_statistic = fit.last_coef / se;
    Ok(AdfResult {
        t_statistic,
        lags_used: lags,
        nobs,
        critical_value_5pct: CRITICAL_VALUE_5PCT,
        stationary: t_statistic < CRITICAL_VALUE_5PCT,
    })
}

struct LsFit {
    last_coef: f64,
    r_diag_last: f64,
    rss: f64,
}

/// In-place Householder QR of the column-major `rows × cols` matrix `a`,
/// applied to `b` as well. Returns the last coefficient, the last diagonal
/// element of R and the residual sum of squares.
fn least_squares(a: &mut [f64], b: &mut [f64], rows: usize, cols: usize) -> Result<LsFit> {
    if rows <= cols {
        return Err(FeatureError::InsufficientData {
            what: "adf regression",
            needed: cols + 1,
            got: rows,
        });
    }
    let col_norms: Vec<f64> = (0..cols)
        .map(|c| a[c * rows..(c + 1) * rows].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut diag = vec![0.0; cols];
    for c in 0..cols {
        let (done, rest) = a.split_at_mut((c + 1) * rows);
        let v = &mut done[c * rows + c..(c + 1) * rows];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-10 * col_norms[c].max(f64::MIN_POSITIVE) {
            return Err(FeatureError::SingularRegression(format!(
                "regressor {c} is collinear with earlier regressors"
            )));
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[c] = alpha;
        let reflect = |w: &mut [f64]| {
            let dot: f64 = v.iter().zip(w.iter()).map(|(p, q)| p * q).sum();
            let s = 2.0 * dot / vnorm2;
            w.iter_mut().zip(v.iter()).for_each(|(q, p)| *q -= s * p);
        };
        for later in rest.chunks_mut(rows) {
            reflect(&mut later[c..]);
        }
        reflect(&mut b[c..]);
    }

    // back substitution for the coefficients
    let mut coef = vec![0.0; cols];
    for c in (0..cols).rev() {
        let mut acc = b[c];
        for j in c + 1..cols {
            acc -= a[j * rows + c] * coef[j];
        }
        coef[c] = acc / diag[c];
    }
    let rss = b[cols..].iter().map(|v| v * v).sum();
    Ok(LsFit {
        last_coef: coef[cols - 1],
        r_diag_last: diag[cols - 1],
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn schwert_rule() {
        assert_eq!(schwert_lag(100), 12);
        assert_eq!(schwert_lag(500), 17);
        assert_eq!(schwert_lag(9600), 37);
    }

    #[test]
    fn constant_series_is_singular() {
        assert!(matches!(
            adf_test(&[3.0; 200], None),
            Err(FeatureError::SingularRegression(_))
        ));
    }

    #[test]
    fn too_short_for_lag_order() {
        assert!(matches!(
            adf_test(&noise(1, 25), Some(10)),
            Err(FeatureError::InsufficientData { .. })
        ));
    }

    #[test]
    fn white_noise_is_stationary_random_walk_is_not() {
        let e = noise(7, 500);
        let r = adf_test(&e, None).unwrap();
        assert!(r.stationary, "{r:?}");
        assert_eq!(r.lags_used, 17);
        let walk: Vec<f64> = e
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let r = adf_test(&walk, None).unwrap();
        assert!(!r.stationary, "{r:?}");
    }

    /// Zero lags: compare against the closed-form normal equations solved
    /// independently by Gaussian elimination.
    #[test]
    fn matches_normal_equations_without_lags() {
        let e = noise(11, 120);
        let y: Vec<f64> = e
            .iter()
            .scan(0.0, |acc, v| {
                *acc = 0.7 * *acc + v;
                Some(*acc)
            })
            .collect();
        let r = adf_test(&y, Some(0)).unwrap();

        let n = y.len() - 1;
        let rows: Vec<[f64; 3]> = (0..n).map(|i| [1.0, (i + 1) as f64, y[i]]).collect();
        let t: Vec<f64> = (0..n).map(|i| y[i + 1] - y[i]).collect();
        let mut xtx = [[0.0; 3]; 3];
        let mut xty = [0.0; 3];
        for (row, &ti) in rows.iter().zip(&t) {
            for a in 0..3 {
                xty[a] += row[a] * ti;
                for b in 0..3 {
                    xtx[a][b] += row[a] * row[b];
                }
            }
        }
        let inv = invert3(xtx);
        let beta: Vec<f64> = (0..3).map(|a| (0..3).map(|b| inv[a][b] * xty[b]).sum()).collect();
        let rss: f64 = rows
            .iter()
            .zip(&t)
            .map(|(row, &ti)| {
                let fit: f64 = (0..3).map(|a| row[a] * beta[a]).sum();
                (ti - fit).powi(2)
            })
            .sum();
        let se = (rss / (n - 3) as f64 * inv[2][2]).sqrt();
        let expected = beta[2] / se;
        assert!((r.t_statistic - expected).abs() < 1e-9, "{} vs {expected}", r.t_statistic);
    }

    fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        [
            [c(1, 2, 1, 2) / det, -c(0, 2, 1, 2) / det, c(0, 1, 1, 2) / det],
            [-c(1, 2, 0, 2) / det, c(0, 2, 0, 2) / det, -c(0, 1, 0, 2) / det],
            [c(1, 2, 0, 1) / det, -c(0, 2, 0, 1) / det, c(0, 1, 0, 1) / det],
        ]
    }
}
