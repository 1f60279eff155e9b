//! Global surrogates: fit an interpretable model to black-box outputs and
//! score it against those outputs.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::error::{Error, Result};
use crate::forest::{argmax, fit_tree, TreeNode, TreeParams};
use crate::linalg::{weighted_r2, weighted_ridge};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SurrogateKind {
    /// One ridge regression per class probability.
    Linear { lambda: f64 },
    /// Classification tree on the black-box labels.
    Tree { max_depth: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurrogateModel {
    Linear {
        intercepts: Vec<f64>,
        /// `coefficients[class][feature]`.
        coefficients: Vec<Vec<f64>>,
    },
    Tree(TreeNode),
}

impl SurrogateModel {
    pub fn predict_scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match self {
            SurrogateModel::Linear { intercepts, coefficients } => {
                Array2::from_shape_fn((x.nrows(), intercepts.len()), |(i, c)| {
                    intercepts[c] + x.row(i).iter().zip(&coefficients[c]).map(|(a, b)| a * b).sum::<f64>()
                })
            }
            SurrogateModel::Tree(t) => {
                let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| t.proba(&r.to_vec())).collect();
                let k = rows.first().map_or(0, Vec::len);
                Array2::from_shape_fn((rows.len(), k), |(i, c)| rows[i][c])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub kind: SurrogateKind,
    pub model: SurrogateModel,
    /// R² against the black-box probability of each class.
    pub r2_per_class: Vec<Option<f64>>,
    /// Fraction of rows where surrogate and black-box labels agree.
    pub agreement: f64,
    pub degenerate: bool,
    pub rows: usize,
}

/// Gets black-box predictions on `x`, fits the interpretable model to them,
/// and measures how well it mimics the black box.
pub fn fit_global_surrogate(predictor: &dyn Predictor, x: ArrayView2<f64>, kind: SurrogateKind) -> Result<SurrogateReport> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty surrogate training set".into()));
    }
    let probs = predictor.predict_proba(x)?;
    let k = probs.ncols();
    let labels: Vec<usize> = probs.rows().into_iter().map(|r| argmax(&r.to_vec())).collect();
    let degenerate = probs.rows().into_iter().all(|r| r == probs.row(0));

    let model = match kind {
        SurrogateKind::Linear { lambda } => {
            let flat: Vec<f64> = x.rows().into_iter().flat_map(|r| r.to_vec()).collect();
            let ones = vec![1.0; n];
            let mut intercepts = Vec::with_capacity(k);
            let mut coefficients = Vec::with_capacity(k);
            for c in 0..k {
                let (b0, beta) = weighted_ridge(&flat, &probs.column(c).to_vec(), &ones, x.ncols(), lambda)?;
                intercepts.push(b0);
                coefficients.push(beta);
            }
            SurrogateModel::Linear { intercepts, coefficients }
        }
        SurrogateKind::Tree { max_depth } => {
            let params = TreeParams {
                max_features: x.ncols(),
                min_leaf: 1,
                max_depth: Some(max_depth),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            SurrogateModel::Tree(fit_tree(x, &labels, k, params, &mut rng)?)
        }
    };

    let scores = model.predict_scores(x);
    let ones = vec![1.0; n];
    let r2_per_class = (0..k)
        .map(|c| {
            if degenerate {
                None
            } else {
                weighted_r2(&probs.column(c).to_vec(), &scores.column(c).to_vec(), &ones)
            }
        })
        .collect();
    let agree = scores
        .rows()
        .into_iter()
        .zip(&labels)
        .filter(|(r, &l)| argmax(&r.to_vec()) == l)
        .count();
    Ok(SurrogateReport {
        kind,
        model,
        r2_per_class,
        agreement: agree as f64 / n as f64,
        degenerate,
        rows: n,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{binary_predictor, FnPredictor};
    use super::*;
    use rand::Rng;

    fn uniform(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| rng.random::<f64>())
    }

    #[test]
    fn tree_black_box_is_reproduced_exactly() {
        let x = uniform(300, 3, 1);
        let labels: Vec<usize> = x
            .rows()
            .into_iter()
            .map(|r| (usize::from(r[0] > 0.5) * 2 + usize::from(r[2] > 0.3)) % 3)
            .collect();
        let params = TreeParams {
            max_features: 3,
            min_leaf: 1,
            max_depth: Some(2),
        };
        let black = fit_tree(x.view(), &labels, 3, params, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let fresh = uniform(500, 3, 2);
        let rep = fit_global_surrogate(&black, fresh.view(), SurrogateKind::Tree { max_depth: 2 }).unwrap();
        assert_eq!(rep.agreement, 1.0);
    }

    #[test]
    fn linear_black_box_linear_surrogate() {
        let x = uniform(400, 2, 3);
        let bb = binary_predictor(|r| 0.2 + 0.3 * r[0] + 0.1 * r[1]);
        let rep = fit_global_surrogate(&bb, x.view(), SurrogateKind::Linear { lambda: 1e-9 }).unwrap();
        for r2 in &rep.r2_per_class {
            assert!(r2.unwrap() >= 0.999);
        }
        assert!(!rep.degenerate);
    }

    #[test]
    fn random_labels_give_majority_rate() {
        let x = uniform(3000, 2, 5);
        let bb = FnPredictor::new(2, |r: &[f64]| {
            // hash of the bits of the row: unrelated to any axis split
            let h = (r[0].to_bits() ^ r[1].to_bits().rotate_left(17)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            if (h >> 60) < 11 {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            }
        });
        let probs = bb.predict_proba(x.view()).unwrap();
        let majority = probs.column(0).sum() / 3000.0;
        let rep = fit_global_surrogate(&bb, x.view(), SurrogateKind::Tree { max_depth: 2 }).unwrap();
        assert!((rep.agreement - majority.max(1.0 - majority)).abs() < 0.03, "{} vs {majority}", rep.agreement);
    }

    #[test]
    fn constant_black_box_is_degenerate() {
        let x = uniform(10, 2, 6);
        let bb = FnPredictor::new(2, |_: &[f64]| vec![0.4, 0.6]);
        let rep = fit_global_surrogate(&bb, x.view(), SurrogateKind::Linear { lambda: 1e-3 }).unwrap();
        assert!(rep.degenerate);
        assert!(rep.r2_per_class.iter().all(Option::is_none));
        assert!(fit_global_surrogate(&bb, x.slice(ndarray::s![0..0, ..]), SurrogateKind::Tree { max_depth: 1 }).is_err());
    }
}
