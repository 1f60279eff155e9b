//! Weighted lasso by coordinate descent in covariance form.
//!
//! All routines take a centered weighted Gram matrix `g` (`q x q`, row-major)
//! and the matching cross-product `r`, so the objective is
//! `0.5 * b'Gb - r'b + alpha * |b|_1` up to a constant.

fn soft_threshold(v: f64, alpha: f64) -> f64 {
    if v > alpha {
        v - alpha
    } else if v < -alpha {
        v + alpha
    } else {
        0.0
    }
}

/// Minimizes the lasso objective from a warm start.
pub fn lasso_cd(g: &[f64], r: &[f64], alpha: f64, beta: &mut [f64], max_iter: usize, tol: f64) {
    let q = r.len();
    for _ in 0..max_iter {
        let mut delta: f64 = 0.0;
        for j in 0..q {
            let gjj = g[j * q + j];
            if gjj <= 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let mut partial = r[j];
            for k in 0..q {
                if k != j {
                    partial -= g[j * q + k] * beta[k];
                }
            }
            let new = soft_threshold(partial, alpha) / gjj;
            delta = delta.max((new - beta[j]).abs());
            beta[j] = new;
        }
        if delta < tol {
            break;
        }
    }
}

/// Walks a geometric penalty path from the smallest penalty that zeroes
/// every coefficient and returns the last support with at most `k` members,
/// ordered by decreasing absolute coefficient.
pub fn lasso_path_select(g: &[f64], r: &[f64], k: usize, steps: usize) -> Vec<usize> {
    let q = r.len();
    let alpha_max = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if q == 0 || alpha_max == 0.0 {
        return Vec::new();
    }
    let mut beta = vec![0.0; q];
    let mut best: Vec<usize> = Vec::new();
    let mut best_beta = beta.clone();
    let steps = steps.max(2);
    for s in 0..steps {
        let alpha = alpha_max * (1e-4_f64).powf(s as f64 / (steps - 1) as f64);
        lasso_cd(g, r, alpha, &mut beta, 1000, 1e-10);
        let support: Vec<usize> = (0..q).filter(|&j| beta[j] != 0.0).collect();
        if support.len() > k {
            break;
        }
        best = support;
        best_beta.clone_from(&beta);
    }
    best.sort_by(|&a, &b| best_beta[b].abs().total_cmp(&best_beta[a].abs()).then(a.cmp(&b)));
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_design_is_soft_thresholding() {
        // G = diag(2, 4, 1): b_j = S(r_j, alpha) / G_jj.
        let g = [2.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 1.0];
        let r = [3.0, -1.0, 0.4];
        let mut b = [0.0; 3];
        lasso_cd(&g, &r, 0.5, &mut b, 100, 1e-14);
        assert!((b[0] - 1.25).abs() < 1e-12);
        assert!((b[1] + 0.125).abs() < 1e-12);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn path_support_respects_k_and_order() {
        let g = [1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0];
        let r = [0.9, -0.5, 0.1];
        assert_eq!(lasso_path_select(&g, &r, 1, 50), vec![0]);
        let two = lasso_path_select(&g, &r, 2, 50);
        assert_eq!(two, vec![0, 1]);
        assert!(lasso_path_select(&g, &[0.0; 3], 2, 50).is_empty());
    }
}
