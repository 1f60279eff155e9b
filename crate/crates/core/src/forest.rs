//! CART classification trees and a bagged random forest with mean decrease
//! in gini impurity.
//!
//! Categorical columns arrive as vocabulary indices and are split by
//! threshold like numeric ones, so a split on `Activity Coded_3 <= 4.5`
//! separates the four most frequent activities from the rest.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains closer than this are treated as ties.
const GAIN_TOLERANCE: f64 = 1e-12;

/// Gini impurity `1 - sum p_c^2` of a class histogram.
pub fn gini(histogram: &[usize]) -> Result<f64> {
    let total: usize = histogram.iter().sum();
    if total == 0 {
        return Err(Error::Domain("gini of an empty histogram".into()));
    }
    Ok(gini_unchecked(histogram, total))
}

fn gini_unchecked(histogram: &[usize], total: usize) -> f64 {
    let n = total as f64;
    1.0 - histogram.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        samples: usize,
        impurity: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        histogram: Vec<usize>,
    },
}

impl TreeNode {
    fn samples(&self) -> usize {
        match self {
            TreeNode::Split { samples, .. } => *samples,
            TreeNode::Leaf { histogram } => histogram.iter().sum(),
        }
    }

    fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split { impurity, .. } => *impurity,
            TreeNode::Leaf { histogram } => gini(histogram).unwrap_or(0.0),
        }
    }

    /// Leaf reached by `row`.
    pub fn leaf(&self, row: &[f64]) -> &[usize] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { histogram } => return histogram,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Leaf class frequencies for `row`.
    pub fn proba(&self, row: &[f64]) -> Vec<f64> {
        let h = self.leaf(row);
        let n: usize = h.iter().sum();
        h.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.proba(row))
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn split_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.split_count() + right.split_count(),
        }
    }

    /// Adds `(n_node / n_root) * gain` of every split to its feature.
    fn accumulate_importance(&self, root_samples: f64, out: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            samples,
            impurity,
            left,
            right,
            ..
        } = self
        {
            let n = *samples as f64;
            let children = (left.samples() as f64 * left.impurity()
                + right.samples() as f64 * right.impurity())
                / n;
            out[*feature] += n / root_samples * (impurity - children).max(0.0);
            left.accumulate_importance(root_samples, out);
            right.accumulate_importance(root_samples, out);
        }
    }
}

/// Lowest index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_features: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_features: usize::MAX,
            min_leaf: 1,
            max_depth: None,
        }
    }
}

/// Best split of one node: `(feature, threshold, gain)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: &'a mut R,
}

impl<R: Rng> Builder<'_, R> {
    fn histogram(&self, rows: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        for &r in rows {
            h[self.y[r]] += 1;
        }
        h
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let hist = self.histogram(rows);
        let n = rows.len();
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        let too_small = n < 2 * self.params.min_leaf.max(1);
        let too_deep = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || too_small || too_deep {
            return TreeNode::Leaf { histogram: hist };
        }
        let n_features = self.x.ncols();
        let k = self.params.max_features.clamp(1, n_features);
        let mut candidates: Vec<usize> = if k >= n_features {
            (0..n_features).collect()
        } else {
            sample(self.rng, n_features, k).into_vec()
        };
        candidates.sort_unstable();
        let parent = gini_unchecked(&hist, n);
        let Some(choice) = best_split(self.x, self.y, rows, &candidates, &hist, parent, self.params.min_leaf)
        else {
            return TreeNode::Leaf { histogram: hist };
        };
        let (left, right) = partition(rows, |r| self.x[[r, choice.feature]] <= choice.threshold);
        let left = self.build(left, depth + 1);
        let right = self.build(right, depth + 1);
        TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            samples: n,
            impurity: parent,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> (&mut [usize], &mut [usize]) {
    rows.sort_by_key(|&r| !pred(r));
    let mid = rows.iter().take_while(|&&r| pred(r)).count();
    rows.split_at_mut(mid)
}

/// Scans midpoints between adjacent distinct values of each candidate
/// feature. Ties go to the lowest feature, then the lowest threshold.
/// Returns `None` only when every candidate is constant on `rows`.
fn best_split(
    x: ArrayView2<f64>,
    y: &[usize],
    rows: &[usize],
    candidates: &[usize],
    hist: &[usize],
    parent: f64,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    let mut best: Option<SplitChoice> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &f in candidates {
        order.clear();
        order.extend(rows.iter().map(|&r| (x[[r, f]], y[r])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = vec![0usize; hist.len()];
        let mut right = hist.to_vec();
        for i in 0..n - 1 {
            let (v, c) = order[i];
            left[c] += 1;
            right[c] -= 1;
            let next = order[i + 1].0;
            if next <= v {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let weighted =
                (nl as f64 * gini_unchecked(&left, nl) + nr as f64 * gini_unchecked(&right, nr)) / n as f64;
            // Zero-gain splits are allowed: balanced XOR has no positive-gain
            // root split but is separable at depth 2.
            let gain = parent - weighted;
            if best.is_none_or(|b| gain > b.gain + GAIN_TOLERANCE) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: v + (next - v) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

/// Grows one tree on all rows of `x`.
pub fn fit_tree<R: Rng>(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    params: TreeParams,
    rng: &mut R,
) -> Result<TreeNode> {
    let mut rows: Vec<usize> = (0..x.nrows()).collect();
    fit_tree_on(x, y, n_classes, params, rng, &mut rows)
}

fn fit_tree_on<R: Rng>(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    params: TreeParams,
    rng: &mut R,
    rows: &mut [usize],
) -> Result<TreeNode> {
    if x.nrows() != y.len() {
        return Err(Error::shape(format!("{} labels", x.nrows()), y.len()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("cannot fit a tree on zero rows".into()));
    }
    if params.max_features == 0 {
        return Err(Error::InvalidArgument("max_features must be >= 1".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} >= class count {n_classes}")));
    }
    let mut b = Builder {
        x,
        y,
        n_classes,
        params,
        rng,
    };
    Ok(b.build(rows, 0))
}

/// Root split chosen over all features; exposed for oracle comparisons.
pub fn root_split(x: ArrayView2<f64>, y: &[usize], n_classes: usize) -> Option<SplitChoice> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let mut hist = vec![0; n_classes];
    for &c in y {
        hist[c] += 1;
    }
    let parent = gini_unchecked(&hist, rows.len());
    let candidates: Vec<usize> = (0..x.ncols()).collect();
    best_split(x, y, &rows, &candidates, &hist, parent, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_features: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    /// Draw a bootstrap sample per tree; off only for testing.
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn new(n_estimators: usize, max_features: usize, seed: u64) -> Self {
        ForestParams {
            n_estimators,
            max_features,
            min_leaf: 1,
            max_depth: None,
            seed,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    /// Rows left out of each tree's bootstrap sample.
    pub oob_indices: Vec<Vec<usize>>,
}

/// Per-tree RNG stream; tree `i` uses `seed + i`.
pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree as u64))
}

pub fn fit_forest(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    feature_names: Vec<String>,
    params: ForestParams,
) -> Result<ForestModel> {
    if params.n_estimators == 0 {
        return Err(Error::InvalidArgument("n_estimators must be >= 1".into()));
    }
    if params.max_features == 0 || params.max_features > x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "max_features {} outside 1..={}",
            params.max_features,
            x.ncols()
        )));
    }
    if feature_names.len() != x.ncols() {
        return Err(Error::shape(format!("{} feature names", x.ncols()), feature_names.len()));
    }
    let m = x.nrows();
    let tree_params = TreeParams {
        max_features: params.max_features,
        min_leaf: params.min_leaf,
        max_depth: params.max_depth,
    };
    let fitted: Vec<(TreeNode, Vec<usize>)> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let (mut rows, oob) = if params.bootstrap {
                let mut drawn = vec![false; m];
                let rows: Vec<usize> = (0..m)
                    .map(|_| {
                        let r = rng.random_range(0..m);
                        drawn[r] = true;
                        r
                    })
                    .collect();
                let oob = (0..m).filter(|&r| !drawn[r]).collect();
                (rows, oob)
            } else {
                ((0..m).collect(), Vec::new())
            };
            fit_tree_on(x, y, n_classes, tree_params, &mut rng, &mut rows).map(|tree| (tree, oob))
        })
        .collect::<Result<_>>()?;
    let (trees, oob_indices) = fitted.into_iter().unzip();
    Ok(ForestModel {
        trees,
        params,
        n_classes,
        feature_names,
        oob_indices,
    })
}

impl ForestModel {
    /// Mean over trees of leaf class frequencies.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::shape(
                format!("{} columns", self.feature_names.len()),
                x.ncols(),
            ));
        }
        let rows: Vec<Vec<f64>> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i).to_vec();
                let mut p = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    for (acc, v) in p.iter_mut().zip(tree.proba(&row)) {
                        *acc += v;
                    }
                }
                let k = self.trees.len() as f64;
                p.iter_mut().for_each(|v| *v /= k);
                p
            })
            .collect();
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, p) in rows.into_iter().enumerate() {
            for (c, v) in p.into_iter().enumerate() {
                out[[i, c]] = v;
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.as_slice().expect("row-major"))).collect())
    }

    /// Hard majority vote over per-tree predictions, lowest class on ties.
    pub fn predict_vote(&self, x: ArrayView2<f64>) -> Vec<usize> {
        (0..x.nrows())
            .map(|i| {
                let row = x.row(i).to_vec();
                let mut votes = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    votes[tree.predict(&row)] += 1.0;
                }
                argmax(&votes)
            })
            .collect()
    }

    pub fn gini_importance(&self) -> ImportanceReport {
        let mut acc = vec![0.0; self.feature_names.len()];
        for tree in &self.trees {
            let root = tree.samples() as f64;
            tree.accumulate_importance(root, &mut acc);
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|v| *v /= k);
        let total: f64 = acc.iter().sum();
        let no_splits = total <= 0.0;
        if !no_splits {
            acc.iter_mut().for_each(|v| *v /= total);
        }
        ImportanceReport {
            features: self.feature_names.clone(),
            importance: acc,
            no_splits,
        }
    }
}

pub fn gini_importance(model: &ForestModel) -> ImportanceReport {
    model.gini_importance()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<String>,
    /// Normalized to sum 1 unless `no_splits`.
    pub importance: Vec<f64>,
    /// Set when no tree has a split; all importances are then 0.
    pub no_splits: bool,
}

impl ImportanceReport {
    /// Features by descending importance; ties by column order.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| self.importance[b].total_cmp(&self.importance[a]).then(a.cmp(&b)));
        idx.into_iter()
            .map(|i| (self.features[i].clone(), self.importance[i]))
            .collect()
    }

    pub fn top(&self, k: usize) -> Vec<(String, f64)> {
        self.ranked().into_iter().take(k).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[2, 2]).unwrap(), 0.5);
        assert_eq!(gini(&[1, 1, 1, 1]).unwrap(), 0.75);
        assert!(gini(&[0, 0]).is_err());
    }

    #[test]
    fn one_dimensional_midpoint_split() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let params = TreeParams {
            max_features: 1,
            ..Default::default()
        };
        let tree = fit_tree(x.view(), &[0, 0, 1, 1], 2, params, &mut rng()).unwrap();
        match &tree {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!((*feature, *threshold), (0, 2.5));
                assert_eq!(**left, TreeNode::Leaf { histogram: vec![2, 0] });
                assert_eq!(**right, TreeNode::Leaf { histogram: vec![0, 2] });
            }
            leaf => panic!("expected split, got {leaf:?}"),
        }
    }

    #[test]
    fn pure_input_is_a_single_leaf() {
        let x = array![[1.0, 5.0], [2.0, 6.0]];
        let tree = fit_tree(x.view(), &[1, 1], 2, TreeParams::default(), &mut rng()).unwrap();
        assert_eq!(tree, TreeNode::Leaf { histogram: vec![0, 2] });
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let params = TreeParams {
            max_features: 2,
            min_leaf: 1,
            max_depth: None,
        };
        let tree = fit_tree(x.view(), &y, 2, params, &mut rng()).unwrap();
        assert_eq!(tree.depth(), 2);
        for (row, &label) in x.rows().into_iter().zip(&y) {
            assert_eq!(tree.predict(row.as_slice().unwrap()), label);
        }
        // Root gain is zero; the tie goes to feature 0 at 0.5.
        let root = root_split(x.view(), &y, 2).unwrap();
        assert_eq!((root.feature, root.threshold), (0, 0.5));
        assert!(root.gain.abs() < 1e-15);
    }

    #[test]
    fn min_leaf_stops_growth() {
        let x = array![[1.0], [2.0], [3.0]];
        let params = TreeParams {
            min_leaf: 2,
            ..Default::default()
        };
        let tree = fit_tree(x.view(), &[0, 1, 0], 2, params, &mut rng()).unwrap();
        assert!(matches!(tree, TreeNode::Leaf { .. }));
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn single_unbootstrapped_tree_equals_fit_tree() {
        let x = array![[0.1, 3.0], [0.4, 1.0], [0.9, 2.0], [0.3, 0.5], [0.8, 0.1]];
        let y = [0, 1, 1, 0, 2];
        let mut params = ForestParams::new(1, 1, 11);
        params.bootstrap = false;
        let forest = fit_forest(x.view(), &y, 3, names(2), params).unwrap();
        let tree = fit_tree(
            x.view(),
            &y,
            3,
            TreeParams {
                max_features: 1,
                ..Default::default()
            },
            &mut tree_rng(11, 0),
        )
        .unwrap();
        assert_eq!(forest.trees[0], tree);
        let p = forest.predict_proba(x.view()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(p.row(i).to_vec(), tree.proba(row.as_slice().unwrap()));
        }
    }

    #[test]
    fn averaging_two_opposite_trees() {
        let forest = ForestModel {
            trees: vec![
                TreeNode::Leaf { histogram: vec![3, 0] },
                TreeNode::Leaf { histogram: vec![0, 5] },
            ],
            params: ForestParams::new(2, 1, 0),
            n_classes: 2,
            feature_names: names(1),
            oob_indices: vec![vec![], vec![]],
        };
        let p = forest.predict_proba(array![[0.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
        assert!(forest.predict_proba(array![[0.0, 1.0]].view()).is_err());
        assert!(forest.gini_importance().no_splits);
    }

    #[test]
    fn same_seed_same_forest() {
        let x = Array2::from_shape_fn((40, 4), |(i, j)| ((i * 7 + j * 13) % 11) as f64);
        let y: Vec<usize> = (0..40).map(|i| (i * 3) % 2).collect();
        let a = fit_forest(x.view(), &y, 2, names(4), ForestParams::new(8, 2, 5)).unwrap();
        let b = fit_forest(x.view(), &y, 2, names(4), ForestParams::new(8, 2, 5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.predict_proba(x.view()).unwrap(),
            b.predict_proba(x.view()).unwrap()
        );
        for (t, oob) in a.oob_indices.iter().enumerate() {
            assert!(oob.len() < 40, "tree {t} should sample some rows");
        }
    }

    #[test]
    fn large_table_iii_configuration_is_valid() {
        let params = ForestParams::new(1000, 100, 0);
        let x = Array2::from_shape_fn((20, 120), |(i, j)| ((i + j) % 5) as f64);
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let f = fit_forest(x.view(), &y, 2, names(120), params).unwrap();
        assert_eq!(f.trees.len(), 1000);
        assert!(fit_forest(x.view(), &y, 2, names(120), ForestParams::new(1, 121, 0)).is_err());
    }

    #[test]
    fn single_split_owns_all_importance() {
        let x = array![[0.0, 9.0], [1.0, 9.0]];
        let mut params = ForestParams::new(1, 2, 0);
        params.bootstrap = false;
        let f = fit_forest(x.view(), &[0, 1], 2, names(2), params).unwrap();
        let imp = f.gini_importance();
        assert_eq!(imp.importance, vec![1.0, 0.0]);
        assert_eq!(imp.top(1)[0].0, "f0");
    }
}
