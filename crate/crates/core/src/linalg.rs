//! Small dense solvers used by the surrogate and local explainers.

use crate::error::{Error, Result};

/// Solves the symmetric positive-definite system `a x = b` in place via
/// Cholesky. `a` is `n x n` row-major.
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::shape(format!("{n}x{n} system"), a.len()));
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::Domain("matrix is not positive definite".into()));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Weighted ridge regression with an unpenalized intercept.
///
/// `x` is `rows x cols` row-major. Returns `(intercept, coefficients)`.
pub fn weighted_ridge(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    cols: usize,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    let rows = y.len();
    if x.len() != rows * cols || w.len() != rows {
        return Err(Error::shape(format!("{rows}x{cols} design"), x.len()));
    }
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::Domain("weights sum to zero".into()));
    }
    // Center with weighted means so the intercept stays unpenalized.
    let mut xmean = vec![0.0; cols];
    let mut ymean = 0.0;
    for r in 0..rows {
        ymean += w[r] * y[r];
        for c in 0..cols {
            xmean[c] += w[r] * x[r * cols + c];
        }
    }
    ymean /= wsum;
    xmean.iter_mut().for_each(|m| *m /= wsum);
    if cols == 0 {
        return Ok((ymean, Vec::new()));
    }
    let mut gram = vec![0.0; cols * cols];
    let mut rhs = vec![0.0; cols];
    let mut xc = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            xc[c] = x[r * cols + c] - xmean[c];
        }
        let yc = y[r] - ymean;
        for i in 0..cols {
            let wi = w[r] * xc[i];
            rhs[i] += wi * yc;
            for j in 0..=i {
                gram[i * cols + j] += wi * xc[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            gram[j * cols + i] = gram[i * cols + j];
        }
        gram[i * cols + i] += lambda.max(1e-12);
    }
    let beta = cholesky_solve(&gram, &rhs, cols)?;
    let intercept = ymean - beta.iter().zip(&xmean).map(|(b, m)| b * m).sum::<f64>();
    Ok((intercept, beta))
}

/// Weighted coefficient of determination. Returns `None` when the target has
/// zero weighted variance.
pub fn weighted_r2(y: &[f64], pred: &[f64], w: &[f64]) -> Option<f64> {
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return None;
    }
    let mean = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let mut ss_tot = 0.0;
    let mut ss_res = 0.0;
    for ((yi, pi), wi) in y.iter().zip(pred).zip(w) {
        ss_tot += wi * (yi - mean).powi(2);
        ss_res += wi * (yi - pi).powi(2);
    }
    if ss_tot <= 1e-300 {
        None
    } else {
        Some(1.0 - ss_res / ss_tot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solves_small_spd() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &[2.0, 1.0], 2).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(cholesky_solve(&[0.0, 1.0, 1.0, 0.0], &[1.0, 1.0], 2).is_err());
    }

    #[test]
    fn recovers_exact_line() {
        // y = 1 + 2 a - 3 b
        let x = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0];
        let y: Vec<f64> = x.chunks(2).map(|r| 1.0 + 2.0 * r[0] - 3.0 * r[1]).collect();
        let w = vec![1.0; 5];
        let (b0, b) = weighted_ridge(&x, &y, &w, 2, 1e-12).unwrap();
        assert_abs_diff_eq!(b0, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(b[1], -3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(weighted_r2(&y, &y, &w).unwrap(), 1.0);
    }

    #[test]
    fn r2_undefined_for_constant_target() {
        assert!(weighted_r2(&[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_none());
    }
}
