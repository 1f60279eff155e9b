//! One-feature effect curves.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Pdp,
    Ice,
    Ale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub kind: CurveKind,
    pub feature: String,
    pub feature_index: usize,
    /// Strictly increasing.
    pub grid: Vec<f64>,
    /// One curve for PDP/ALE, one per background row for ICE.
    pub values: Vec<Vec<f64>>,
    pub target_class: usize,
    /// Grid reaches outside the observed feature range.
    pub extrapolated: bool,
    pub notes: Vec<String>,
}

impl CurveSet {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.feature = name.into();
        self
    }
}

fn check_inputs(
    predictor: &dyn Predictor,
    x: ArrayView2<f64>,
    feature: usize,
    class: usize,
) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("empty background".into()));
    }
    if feature >= x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "feature {feature} out of range for {} columns",
            x.ncols()
        )));
    }
    if class >= predictor.n_classes() {
        return Err(Error::InvalidArgument(format!("class {class} out of range")));
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("grid must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

/// Predictions for every background row with `feature := value`.
fn sweep(
    predictor: &dyn Predictor,
    x: ArrayView2<f64>,
    feature: usize,
    value: f64,
    class: usize,
) -> Result<Vec<f64>> {
    let mut modified = x.to_owned();
    modified.column_mut(feature).fill(value);
    let p = predictor.predict_proba(modified.view())?;
    Ok(p.column(class).to_vec())
}

fn observed_range(x: ArrayView2<f64>, feature: usize) -> (f64, f64) {
    x.column(feature)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Individual conditional expectation: one curve per background row.
pub fn ice(
    predictor: &dyn Predictor,
    x: ArrayView2<f64>,
    feature: usize,
    grid: &[f64],
    class: usize,
) -> Result<CurveSet> {
    check_inputs(predictor, x, feature, class)?;
    check_grid(grid)?;
    let mut values = vec![Vec::with_capacity(grid.len()); x.nrows()];
    for &g in grid {
        for (curve, p) in values.iter_mut().zip(sweep(predictor, x, feature, g, class)?) {
            curve.push(p);
        }
    }
    let (lo, hi) = observed_range(x, feature);
    Ok(CurveSet {
        kind: CurveKind::Ice,
        feature: format!("x{feature}"),
        feature_index: feature,
        grid: grid.to_vec(),
        values,
        target_class: class,
        extrapolated: grid[0] < lo || grid[grid.len() - 1] > hi,
        notes: Vec::new(),
    })
}

/// Averages ICE curves point by point in row order.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.len() as f64;
    let len = curves.first().map_or(0, Vec::len);
    (0..len)
        .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / n)
        .collect()
}

/// Partial dependence: the Monte-Carlo mean over the background of the
/// prediction with the feature pinned to each grid value.
pub fn pdp(
    predictor: &dyn Predictor,
    x: ArrayView2<f64>,
    feature: usize,
    grid: &[f64],
    class: usize,
) -> Result<CurveSet> {
    let ice = ice(predictor, x, feature, grid, class)?;
    Ok(CurveSet {
        kind: CurveKind::Pdp,
        values: vec![mean_curve(&ice.values)],
        ..ice
    })
}

/// Equal-frequency grid of up to `n + 1` distinct points from the column.
pub fn quantile_grid(x: ArrayView2<f64>, feature: usize, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = x.column(feature).to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Vec::new();
    }
    let n = n.max(1);
    let mut grid: Vec<f64> = (0..=n)
        .map(|k| {
            let pos = k as f64 * (v.len() - 1) as f64 / n as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        })
        .collect();
    grid.dedup();
    grid
}

/// Accumulated local effects over `n_intervals` equal-frequency intervals,
/// centered so the curve has mean 0 over its grid points.
pub fn ale(
    predictor: &dyn Predictor,
    x: ArrayView2<f64>,
    feature: usize,
    n_intervals: usize,
    class: usize,
) -> Result<CurveSet> {
    check_inputs(predictor, x, feature, class)?;
    if n_intervals == 0 {
        return Err(Error::InvalidArgument("n_intervals must be >= 1".into()));
    }
    let mut grid = quantile_grid(x, feature, n_intervals);
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "feature {feature} needs at least 2 distinct values"
        )));
    }
    let column: Vec<f64> = x.column(feature).to_vec();
    let mut notes = Vec::new();
    // Drop the upper edge of empty intervals, merging them with the next one.
    loop {
        let counts = interval_counts(&column, &grid);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let edge = if empty + 1 < grid.len() - 1 { empty + 1 } else { empty };
        notes.push(format!(
            "interval ({}, {}] was empty and merged with a neighbor",
            grid[empty],
            grid[empty + 1]
        ));
        grid.remove(edge);
    }
    let members = interval_members(&column, &grid);
    let mut curve = vec![0.0; grid.len()];
    for (j, rows) in members.iter().enumerate() {
        let sub = x.select(ndarray::Axis(0), rows);
        let upper = sweep(predictor, sub.view(), feature, grid[j + 1], class)?;
        let lower = sweep(predictor, sub.view(), feature, grid[j], class)?;
        let effect = upper.iter().zip(&lower).map(|(u, l)| u - l).sum::<f64>() / rows.len() as f64;
        curve[j + 1] = curve[j] + effect;
    }
    let mean = curve.iter().sum::<f64>() / curve.len() as f64;
    curve.iter_mut().for_each(|v| *v -= mean);
    Ok(CurveSet {
        kind: CurveKind::Ale,
        feature: format!("x{feature}"),
        feature_index: feature,
        grid,
        values: vec![curve],
        target_class: class,
        extrapolated: false,
        notes,
    })
}

/// Interval `j` covers `(grid[j], grid[j+1]]`; the first one also holds
/// `grid[0]`.
fn interval_of(v: f64, grid: &[f64]) -> usize {
    let k = grid.partition_point(|&g| g < v);
    k.saturating_sub(1).min(grid.len() - 2)
}

fn interval_counts(column: &[f64], grid: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; grid.len() - 1];
    for &v in column {
        counts[interval_of(v, grid)] += 1;
    }
    counts
}

fn interval_members(column: &[f64], grid: &[f64]) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); grid.len() - 1];
    for (i, &v) in column.iter().enumerate() {
        m[interval_of(v, grid)].push(i);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::super::{binary_predictor, FnPredictor};
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn feature_ignoring_predictor_gives_flat_pdp_and_zero_ale() {
        let p = binary_predictor(|r| 0.2 + 0.1 * r[1]);
        let x = array![[1.0, 0.0], [2.0, 1.0], [3.0, 2.0], [5.0, 1.0]];
        let curve = pdp(&p, x.view(), 0, &[1.0, 2.0, 4.0], 1).unwrap();
        let v = &curve.values[0];
        assert!(v.iter().all(|&y| (y - v[0]).abs() < 1e-15));
        let a = ale(&p, x.view(), 0, 3, 1).unwrap();
        assert!(a.values[0].iter().all(|&y| y == 0.0));
    }

    #[test]
    fn linear_probability_pdp() {
        let p = binary_predictor(|r| 0.1 * r[0]);
        let x = array![[0.0], [5.0], [9.0]];
        let curve = pdp(&p, x.view(), 0, &[1.0, 2.0, 3.0], 1).unwrap();
        for (got, want) in curve.values[0].iter().zip([0.1, 0.2, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(!curve.extrapolated);
        assert!(pdp(&p, x.view(), 0, &[1.0, 20.0], 1).unwrap().extrapolated);
    }

    #[test]
    fn ice_mean_is_pdp_and_single_row_ice_is_pdp() {
        let p = binary_predictor(|r| (0.1 * r[0] * r[1]).clamp(0.0, 1.0));
        let x = array![[1.0, 1.0], [2.0, 3.0], [0.5, 2.0], [1.5, 0.0]];
        let grid = [0.0, 1.0, 2.0];
        let ice = ice(&p, x.view(), 0, &grid, 1).unwrap();
        let pdp_curve = pdp(&p, x.view(), 0, &grid, 1).unwrap();
        assert_eq!(mean_curve(&ice.values), pdp_curve.values[0]);
        // Interaction: slopes differ per row.
        let slopes: Vec<f64> = ice.values.iter().map(|c| c[1] - c[0]).collect();
        assert!((slopes[0] - 0.1).abs() < 1e-12 && (slopes[1] - 0.3).abs() < 1e-12);
        assert!(slopes[3].abs() < 1e-15);
        let one = x.slice(ndarray::s![1..2, ..]);
        let a = super::ice(&p, one, 0, &grid, 1).unwrap();
        let b = super::pdp(&p, one, 0, &grid, 1).unwrap();
        assert_eq!(a.values[0], b.values[0]);
    }

    #[test]
    fn ale_of_linear_probability_is_centered_line() {
        let p = binary_predictor(|r| 0.1 * r[0]);
        let x = Array2::from_shape_fn((9, 1), |(i, _)| i as f64);
        let a = ale(&p, x.view(), 0, 4, 1).unwrap();
        assert_eq!(a.grid, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        // 0.1 * (z - 4): -0.4, -0.2, 0, 0.2, 0.4
        for (z, v) in a.grid.iter().zip(&a.values[0]) {
            assert!((v - 0.1 * (z - 4.0)).abs() < 1e-12, "{z} -> {v}");
        }
        assert!(a.values[0].iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn ale_merges_empty_intervals() {
        let p = binary_predictor(|r| 0.1 * r[0]);
        let x = array![[0.0], [0.0], [0.0], [0.0], [0.0], [10.0]];
        let a = ale(&p, x.view(), 0, 5, 1).unwrap();
        assert_eq!(a.grid.first(), Some(&0.0));
        assert_eq!(a.grid.last(), Some(&10.0));
        assert!(a.grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn errors() {
        let p = FnPredictor::new(2, |_: &[f64]| vec![0.5, 0.5]);
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(pdp(&p, empty.view(), 0, &[1.0], 0).is_err());
        let x = array![[1.0], [1.0]];
        assert!(ale(&p, x.view(), 0, 2, 0).is_err());
        assert!(pdp(&p, x.view(), 0, &[2.0, 1.0], 0).is_err());
        assert!(pdp(&p, x.view(), 0, &[1.0], 5).is_err());
    }
}
