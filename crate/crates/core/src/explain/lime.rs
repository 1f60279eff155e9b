//! Local surrogates fit on kernel-weighted perturbations of one instance.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::lasso::lasso_path_select;
use super::Predictor;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, weighted_r2, weighted_ridge};

pub const RIDGE_LAMBDA: f64 = 1e-3;

/// Background rows with per-column names and kinds.
#[derive(Debug, Clone, Copy)]
pub struct Background<'a> {
    pub x: ArrayView2<'a, f64>,
    pub names: &'a [String],
    pub categorical: &'a [bool],
}

impl<'a> Background<'a> {
    pub fn new(x: ArrayView2<'a, f64>, names: &'a [String], categorical: &'a [bool]) -> Result<Self> {
        if names.len() != x.ncols() || categorical.len() != x.ncols() {
            return Err(Error::shape(x.ncols(), names.len().min(categorical.len())));
        }
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("empty background".into()));
        }
        Ok(Background { x, names, categorical })
    }

    fn std_devs(&self) -> Vec<f64> {
        let n = self.x.nrows() as f64;
        self.x
            .columns()
            .into_iter()
            .map(|c| {
                let m = c.sum() / n;
                (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub samples: Array2<f64>,
    /// 1 where a sample agrees with the instance.
    pub binary: Array2<f64>,
}

/// Draws `n_samples` neighbors of `instance`; row 0 is the instance itself.
///
/// Categorical columns keep the instance value with probability 0.5 and
/// otherwise take the value of a uniformly drawn background row. Numeric
/// columns get gaussian noise with the background standard deviation and
/// count as agreeing within half a standard deviation.
pub fn perturb(instance: &[f64], bg: &Background<'_>, n_samples: usize, seed: u64) -> Result<Perturbation> {
    let p = bg.x.ncols();
    if instance.len() != p {
        return Err(Error::shape(p, instance.len()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let sds = bg.std_devs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Array2::zeros((n_samples, p));
    let mut binary = Array2::ones((n_samples, p));
    for (j, &v) in instance.iter().enumerate() {
        samples[[0, j]] = v;
    }
    let rows = bg.x.nrows();
    for s in 1..n_samples {
        for j in 0..p {
            let v = instance[j];
            let (value, agrees) = if bg.categorical[j] {
                if rng.random_bool(0.5) {
                    (v, true)
                } else {
                    let drawn = bg.x[[rng.random_range(0..rows), j]];
                    (drawn, drawn == v)
                }
            } else if sds[j] > 0.0 {
                let noise: f64 = Normal::new(0.0, sds[j]).expect("positive sd").sample(&mut rng);
                (v + noise, noise.abs() <= 0.5 * sds[j])
            } else {
                (v, true)
            };
            samples[[s, j]] = value;
            binary[[s, j]] = if agrees { 1.0 } else { 0.0 };
        }
    }
    Ok(Perturbation { samples, binary })
}

/// `exp(-d^2 / sigma^2)`.
pub fn kernel_weight(distance: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel width must be > 0, got {sigma}")));
    }
    if !(distance >= 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be >= 0, got {distance}")));
    }
    Ok((-(distance * distance) / (sigma * sigma)).exp())
}

pub fn default_kernel_width(n_features: usize) -> f64 {
    0.75 * (n_features as f64).sqrt()
}

/// Cosine distance from a binary vector to the all-ones vector.
fn cosine_distance(z: &[f64]) -> f64 {
    let ones: f64 = z.iter().sum();
    if ones <= 0.0 {
        1.0
    } else {
        (1.0 - ones / (ones.sqrt() * (z.len() as f64).sqrt())).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Forward,
    Lasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub k: usize,
    pub n_samples: usize,
    /// Defaults to `0.75 * sqrt(#features)`.
    pub sigma: Option<f64>,
    pub seed: u64,
    pub selection: Selection,
}

impl LimeConfig {
    pub fn new(k: usize, n_samples: usize, seed: u64) -> Self {
        LimeConfig {
            k,
            n_samples,
            sigma: None,
            seed,
            selection: Selection::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: String,
    pub index: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub instance: String,
    pub class: usize,
    /// Sorted by decreasing magnitude.
    pub weights: Vec<FeatureWeight>,
    pub intercept: f64,
    /// Weighted R² of the surrogate; `None` when the target is constant.
    pub fidelity: Option<f64>,
    pub kernel_width: f64,
    pub flag: Option<String>,
    pub config: LimeConfig,
}

impl Explanation {
    pub fn weight(&self, feature: &str) -> f64 {
        self.weights
            .iter()
            .find(|w| w.feature == feature)
            .map_or(0.0, |w| w.weight)
    }

    /// Position of `feature` when ranked by magnitude.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.weights.iter().position(|w| w.feature == feature && w.weight != 0.0)
    }
}

/// Weighted centered cross-products over the columns in `cols`.
struct Moments {
    cols: Vec<usize>,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    tss: f64,
}

fn moments(z: &Array2<f64>, y: &[f64], w: &[f64]) -> Moments {
    let wsum: f64 = w.iter().sum();
    let p = z.ncols();
    let ybar = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let zbar: Vec<f64> = (0..p)
        .map(|j| z.column(j).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum)
        .collect();
    let cols: Vec<usize> = (0..p)
        .filter(|&j| z.column(j).iter().any(|&v| (v - zbar[j]).abs() > 1e-12))
        .collect();
    let q = cols.len();
    let mut gram = vec![0.0; q * q];
    let mut rhs = vec![0.0; q];
    let mut tss = 0.0;
    let mut zc = vec![0.0; q];
    for (r, row) in z.rows().into_iter().enumerate() {
        for (a, &j) in cols.iter().enumerate() {
            zc[a] = row[j] - zbar[j];
        }
        let yc = y[r] - ybar;
        tss += w[r] * yc * yc;
        for a in 0..q {
            let wa = w[r] * zc[a];
            rhs[a] += wa * yc;
            for b in 0..=a {
                gram[a * q + b] += wa * zc[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            gram[b * q + a] = gram[a * q + b];
        }
    }
    Moments { cols, gram, rhs, tss }
}

impl Moments {
    /// Residual sum of squares of the ridge fit on `subset` (indices into
    /// `cols`).
    fn rss(&self, subset: &[usize]) -> f64 {
        let q = self.cols.len();
        let m = subset.len();
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for (i, &si) in subset.iter().enumerate() {
            b[i] = self.rhs[si];
            for (j, &sj) in subset.iter().enumerate() {
                a[i * m + j] = self.gram[si * q + sj];
            }
            a[i * m + i] += RIDGE_LAMBDA;
        }
        let Ok(beta) = cholesky_solve(&a, &b, m) else {
            return f64::INFINITY;
        };
        let mut fit = 0.0;
        for i in 0..m {
            fit -= 2.0 * beta[i] * b[i];
            for j in 0..m {
                fit += beta[i] * beta[j] * self.gram[subset[i] * q + subset[j]];
            }
        }
        self.tss + fit
    }

    /// Greedy forward selection; ties go to the lower column.
    fn forward(&self, k: usize) -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < k.min(self.cols.len()) {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..self.cols.len() {
                if chosen.contains(&c) {
                    continue;
                }
                let mut trial = chosen.clone();
                trial.push(c);
                let rss = self.rss(&trial);
                if best.is_none_or(|(_, b)| rss < b - 1e-15 * b.abs().max(1.0)) {
                    best = Some((c, rss));
                }
            }
            match best {
                Some((c, _)) => chosen.push(c),
                None => break,
            }
        }
        chosen
    }
}

/// Explains `predictor`'s probability of `class` around `instance`.
pub fn lime_explain(
    predictor: &dyn Predictor,
    instance: &[f64],
    instance_id: &str,
    bg: &Background<'_>,
    class: usize,
    config: &LimeConfig,
) -> Result<Explanation> {
    if config.k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    if class >= predictor.n_classes() {
        return Err(Error::InvalidArgument(format!("class {class} out of range")));
    }
    let p = bg.x.ncols();
    let sigma = config.sigma.unwrap_or_else(|| default_kernel_width(p));
    let pert = perturb(instance, bg, config.n_samples, config.seed)?;
    let probs = predictor.predict_proba(pert.samples.view())?;
    let y: Vec<f64> = probs.column(class).to_vec();
    let w = pert
        .binary
        .rows()
        .into_iter()
        .map(|z| kernel_weight(cosine_distance(z.as_slice().expect("row-major")), sigma))
        .collect::<Result<Vec<f64>>>()?;
    let m = moments(&pert.binary, &y, &w);

    let mut explanation = Explanation {
        instance: instance_id.to_string(),
        class,
        weights: Vec::new(),
        intercept: y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>(),
        fidelity: None,
        kernel_width: sigma,
        flag: None,
        config: LimeConfig {
            sigma: Some(sigma),
            ..config.clone()
        },
    };
    if m.tss <= 1e-24 * w.iter().sum::<f64>() {
        explanation.flag = Some("prediction is constant around the instance".into());
        return Ok(explanation);
    }
    if m.cols.is_empty() {
        explanation.flag = Some("no interpretable feature varies in the sample".into());
        return Ok(explanation);
    }
    let picked = match config.selection {
        Selection::Forward => m.forward(config.k),
        Selection::Lasso => lasso_path_select(&m.gram, &m.rhs, config.k, 100),
    };
    let features: Vec<usize> = picked.iter().map(|&c| m.cols[c]).collect();
    let n = pert.binary.nrows();
    let design: Vec<f64> = (0..n)
        .flat_map(|r| features.iter().map(move |&j| (r, j)))
        .map(|(r, j)| pert.binary[[r, j]])
        .collect();
    let (intercept, beta) = weighted_ridge(&design, &y, &w, features.len(), RIDGE_LAMBDA)?;
    let pred: Vec<f64> = (0..n)
        .map(|r| {
            intercept
                + beta
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b * design[r * features.len() + i])
                    .sum::<f64>()
        })
        .collect();
    explanation.intercept = intercept;
    explanation.fidelity = weighted_r2(&y, &pred, &w);
    let mut weights: Vec<FeatureWeight> = features
        .iter()
        .zip(&beta)
        .map(|(&j, &b)| FeatureWeight {
            feature: bg.names[j].clone(),
            index: j,
            weight: b,
        })
        .collect();
    weights.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.index.cmp(&b.index)));
    explanation.weights = weights;
    Ok(explanation)
}

#[cfg(test)]
mod tests {
    use super::super::{binary_predictor, FnPredictor};
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("z{j}")).collect()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_weight(0.0, 2.0).unwrap(), 1.0);
        assert_abs_diff_eq!(kernel_weight(2.0, 2.0).unwrap(), 0.36787944, epsilon = 1e-8);
        assert_abs_diff_eq!(kernel_weight(4.0, 2.0).unwrap(), 0.01831564, epsilon = 1e-8);
        assert!(kernel_weight(1.0, 0.0).is_err());
        assert!(kernel_weight(1.0, -1.0).is_err());
    }

    #[test]
    fn first_sample_is_instance_and_constant_columns_stay() {
        let x = array![[1.0, 5.0, 0.0], [2.0, 5.0, 1.0], [3.0, 5.0, 1.0]];
        let n = names(3);
        let cat = [false, false, true];
        let bg = Background::new(x.view(), &n, &cat).unwrap();
        let p = perturb(&[2.0, 5.0, 1.0], &bg, 200, 3).unwrap();
        assert_eq!(p.samples.row(0).to_vec(), vec![2.0, 5.0, 1.0]);
        assert!(p.binary.row(0).iter().all(|&v| v == 1.0));
        assert!(p.samples.column(1).iter().all(|&v| v == 5.0));
        assert!(p.binary.column(1).iter().all(|&v| v == 1.0));
        assert!(p.samples.column(0).iter().any(|&v| v != 2.0));
    }

    #[test]
    fn categorical_keep_rate_matches_expectation() {
        // value 1 has background frequency 0.3 -> keep rate 0.5 + 0.15.
        let x = ndarray::Array2::from_shape_fn((10, 1), |(i, _)| if i < 3 { 1.0 } else { 0.0 });
        let n = names(1);
        let bg = Background::new(x.view(), &n, &[true]).unwrap();
        let p = perturb(&[1.0], &bg, 10_001, 11).unwrap();
        let rate = p.binary.column(0).iter().skip(1).sum::<f64>() / 10_000.0;
        assert!((rate - 0.65).abs() < 0.02, "{rate}");
    }

    #[test]
    fn logistic_black_box_picks_its_feature() {
        let p = 4;
        let x = ndarray::Array2::from_shape_fn((40, p), |(i, j)| ((i >> j) & 1) as f64);
        let n = names(p);
        let cat = vec![true; p];
        let bg = Background::new(x.view(), &n, &cat).unwrap();
        let model = binary_predictor(|r| 1.0 / (1.0 + (-(2.0 * r[1] - 1.0)).exp()));
        let e = lime_explain(&model, &[1.0, 1.0, 1.0, 1.0], "a", &bg, 1, &LimeConfig::new(1, 2000, 5)).unwrap();
        assert_eq!(e.weights.len(), 1);
        assert_eq!(e.weights[0].feature, "z1");
        assert!(e.weights[0].weight > 0.0);
        let lasso = LimeConfig {
            selection: Selection::Lasso,
            ..LimeConfig::new(1, 2000, 5)
        };
        let e = lime_explain(&model, &[1.0, 1.0, 1.0, 1.0], "a", &bg, 1, &lasso).unwrap();
        assert_eq!(e.weights[0].feature, "z1");
    }

    #[test]
    fn recovers_linear_coefficients_and_is_deterministic() {
        let coef = [0.05, -0.03, 0.02, 0.0, 0.04];
        let p = coef.len();
        let x = ndarray::Array2::from_shape_fn((64, p), |(i, j)| ((i >> j) & 1) as f64);
        let n = names(p);
        let cat = vec![true; p];
        let bg = Background::new(x.view(), &n, &cat).unwrap();
        let model = binary_predictor(move |r| 0.4 + r.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>());
        let cfg = LimeConfig::new(5, 3000, 9);
        let e = lime_explain(&model, &[1.0; 5], "a", &bg, 1, &cfg).unwrap();
        for (j, c) in coef.iter().enumerate() {
            assert_abs_diff_eq!(e.weight(&format!("z{j}")), *c, epsilon = 2e-3);
        }
        assert!(e.fidelity.unwrap() > 0.99);
        assert_eq!(e, lime_explain(&model, &[1.0; 5], "a", &bg, 1, &cfg).unwrap());
    }

    #[test]
    fn infinite_width_matches_unweighted_least_squares() {
        let p = 3;
        let x = ndarray::Array2::from_shape_fn((8, p), |(i, j)| ((i >> j) & 1) as f64);
        let n = names(p);
        let cat = vec![true; p];
        let bg = Background::new(x.view(), &n, &cat).unwrap();
        let model = binary_predictor(|r| 0.2 + 0.3 * r[0] * r[1] + 0.1 * r[2]);
        let cfg = LimeConfig {
            sigma: Some(1e12),
            ..LimeConfig::new(3, 500, 2)
        };
        let e = lime_explain(&model, &[1.0; 3], "a", &bg, 1, &cfg).unwrap();
        let pert = perturb(&[1.0; 3], &bg, 500, 2).unwrap();
        let y: Vec<f64> = pert.samples.rows().into_iter().map(|r| 0.2 + 0.3 * r[0] * r[1] + 0.1 * r[2]).collect();
        let design: Vec<f64> = pert.binary.iter().copied().collect();
        let (b0, beta) = weighted_ridge(&design, &y, &vec![1.0; 500], 3, RIDGE_LAMBDA).unwrap();
        assert_abs_diff_eq!(e.intercept, b0, epsilon = 1e-9);
        for (j, b) in beta.iter().enumerate() {
            assert_abs_diff_eq!(e.weight(&format!("z{j}")), *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_predictor_is_flagged() {
        let x = array![[0.0], [1.0]];
        let n = names(1);
        let bg = Background::new(x.view(), &n, &[true]).unwrap();
        let model = FnPredictor::new(2, |_: &[f64]| vec![0.3, 0.7]);
        let e = lime_explain(&model, &[1.0], "a", &bg, 1, &LimeConfig::new(2, 100, 1)).unwrap();
        assert!(e.weights.is_empty());
        assert!(e.fidelity.is_none());
        assert!(e.flag.is_some());
        assert!(lime_explain(&model, &[1.0], "a", &bg, 1, &LimeConfig::new(0, 100, 1)).is_err());
    }
}
