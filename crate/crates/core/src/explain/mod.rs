//! Model-agnostic explanations over any [`Predictor`].
//!
//! - [`curves`]: partial dependence, individual conditional expectation and
//!   accumulated local effects for one feature
//! - [`surrogate`]: global interpretable models fit to black-box outputs
//! - [`lime`]: local kernel-weighted linear surrogates around one instance
//! - [`pick`]: greedy coverage-maximizing choice of explanations

pub mod curves;
pub mod lasso;
pub mod lime;
pub mod pick;
pub mod surrogate;

pub use curves::{ale, ice, pdp, quantile_grid, CurveKind, CurveSet};
pub use lime::{
    default_kernel_width, kernel_weight, lime_explain, perturb, Explanation, LimeConfig, Perturbation,
    Selection,
};
pub use pick::{submodular_pick, GlobalSummary};
pub use surrogate::{fit_global_surrogate, SurrogateKind, SurrogateModel, SurrogateReport};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::forest::{ForestModel, TreeNode};

/// Black-box contract: instances in, class probabilities out. Implementations
/// must be pure.
pub trait Predictor: Sync {
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

impl Predictor for ForestModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        ForestModel::predict_proba(self, x)
    }
}

impl Predictor for TreeNode {
    fn n_classes(&self) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { histogram } => return histogram.len(),
                TreeNode::Split { left, .. } => node = left,
            }
        }
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let k = Predictor::n_classes(self);
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (c, p) in self.proba(&row.to_vec()).into_iter().enumerate() {
                out[[i, c]] = p;
            }
        }
        Ok(out)
    }
}

/// Wraps a row-wise closure returning class probabilities.
pub struct FnPredictor<F> {
    n_classes: usize,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(n_classes: usize, f: F) -> Self {
        FnPredictor { n_classes, f }
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let p = (self.f)(&row.to_vec());
            if p.len() != self.n_classes {
                return Err(Error::shape(self.n_classes, p.len()));
            }
            for (c, v) in p.into_iter().enumerate() {
                out[[i, c]] = v;
            }
        }
        Ok(out)
    }
}

/// Two-class predictor from a probability of class 1.
pub fn binary_predictor<F>(p1: F) -> FnPredictor<impl Fn(&[f64]) -> Vec<f64> + Sync>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    FnPredictor::new(2, move |row| {
        let p = p1(row).clamp(0.0, 1.0);
        vec![1.0 - p, p]
    })
}
