//! Central finite-difference verification of the analytic gradients.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cross_entropy, softmax, GradientFault, SeqNetModel};
use crate::encode::SequenceDataset;
use crate::error::{Error, Result};

const MIN_COORDINATES: usize = 50;

/// Gradients below this magnitude on both sides are compared absolutely.
/// Central differences at epsilon 1e-5 carry about 1e-11 of round-off for
/// losses near 1, which swamps the relative error of smaller gradients.
const TINY: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Worst relative error per parameter tensor, plus `softmax_ce` for the
    /// output nonlinearity.
    pub per_tensor: BTreeMap<String, f64>,
    pub coordinates: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < TINY {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Checks at least 50 coordinates (all of them when the model is smaller).
pub fn grad_check(
    model: &SeqNetModel,
    data: &SequenceDataset,
    rows: &[usize],
    epsilon: f64,
) -> Result<GradCheckReport> {
    grad_check_with(model, data, rows, epsilon, 12, 0, None)
}

/// Samples up to `per_tensor` coordinates of every parameter tensor,
/// preferring ones with a nonzero analytic gradient.
pub fn grad_check_with(
    model: &SeqNetModel,
    data: &SequenceDataset,
    rows: &[usize],
    epsilon: f64,
    per_tensor: usize,
    seed: u64,
    fault: Option<GradientFault>,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1e-2]")));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("grad_check needs at least one row".into()));
    }
    let (_, grad) = model.loss_and_grad(data, rows, fault);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let analytic: Vec<(String, Vec<f64>)> = grad
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.to_vec()))
        .collect();
    let total: usize = analytic.iter().map(|(_, t)| t.len()).sum();
    let mut quota: Vec<usize> = analytic.iter().map(|(_, t)| per_tensor.min(t.len())).collect();
    let mut deficit = MIN_COORDINATES.min(total).saturating_sub(quota.iter().sum());
    while deficit > 0 {
        for (q, (_, t)) in quota.iter_mut().zip(&analytic) {
            if deficit > 0 && *q < t.len() {
                *q += 1;
                deficit -= 1;
            }
        }
    }

    let mut probe = model.clone();
    let mut per = BTreeMap::new();
    let mut checked = 0;
    for (k, (name, g)) in analytic.iter().enumerate() {
        let nonzero: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
        let take = quota[k];
        let pool: Vec<usize> = if nonzero.len() >= take {
            nonzero
        } else {
            (0..g.len()).collect()
        };
        let mut picks: Vec<usize> = sample(&mut rng, pool.len(), take).into_iter().map(|i| pool[i]).collect();
        picks.sort_unstable();
        let mut worst: f64 = 0.0;
        for i in picks {
            let original = probe.params.tensors()[k].1[i];
            set(&mut probe, k, i, original + epsilon);
            let up = probe.loss(data, rows);
            set(&mut probe, k, i, original - epsilon);
            let down = probe.loss(data, rows);
            set(&mut probe, k, i, original);
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(g[i], numeric));
            checked += 1;
        }
        per.insert(name.clone(), worst);
    }
    per.insert("softmax_ce".into(), softmax_ce_check(&mut rng, epsilon));
    let max = per.values().cloned().fold(0.0, f64::max);
    debug_assert!(checked >= MIN_COORDINATES.min(total));
    Ok(GradCheckReport {
        max_relative_error: max,
        per_tensor: per,
        coordinates: checked,
    })
}

fn set(model: &mut SeqNetModel, tensor: usize, index: usize, value: f64) {
    let mut tensors = model.params.tensors_mut();
    tensors[tensor].1[index] = value;
}

/// `d CE(softmax(z), y) / dz = p - onehot(y)` against finite differences.
fn softmax_ce_check(rng: &mut ChaCha8Rng, epsilon: f64) -> f64 {
    use rand::Rng;
    let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
    let label = 2;
    let mut analytic = softmax(&logits);
    analytic[label] -= 1.0;
    let mut worst: f64 = 0.0;
    for i in 0..logits.len() {
        let mut up = logits.clone();
        up[i] += epsilon;
        let mut down = logits.clone();
        down[i] -= epsilon;
        let numeric =
            (cross_entropy(&softmax(&up), label) - cross_entropy(&softmax(&down), label)) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
