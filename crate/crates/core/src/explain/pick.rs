//! Greedy submodular pick over local explanations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Explanation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub picked: Vec<String>,
    pub explanations: Vec<Explanation>,
    pub coverage: f64,
    pub total_importance: f64,
    /// `sqrt(sum |w|)` per feature over all candidates.
    pub importance: BTreeMap<String, f64>,
    pub budget: usize,
}

fn support(e: &Explanation) -> BTreeSet<&str> {
    e.weights
        .iter()
        .filter(|w| w.weight != 0.0)
        .map(|w| w.feature.as_str())
        .collect()
}

/// Global feature importance over a candidate set.
pub fn feature_importance(candidates: &[Explanation]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for e in candidates {
        for w in &e.weights {
            if w.weight != 0.0 {
                *sums.entry(w.feature.clone()).or_default() += w.weight.abs();
            }
        }
    }
    sums.into_iter().map(|(k, v)| (k, v.sqrt())).collect()
}

/// Importance mass of the features covered by `subset`.
pub fn coverage(candidates: &[Explanation], importance: &BTreeMap<String, f64>, subset: &[usize]) -> f64 {
    let covered: BTreeSet<&str> = subset.iter().flat_map(|&i| support(&candidates[i])).collect();
    covered.iter().map(|f| importance[*f]).sum()
}

/// Picks up to `budget` explanations greedily by marginal coverage; equal
/// gains go to the smaller instance id.
pub fn submodular_pick(candidates: &[Explanation], budget: usize) -> Result<GlobalSummary> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate set".into()));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be >= 1".into()));
    }
    let importance = feature_importance(candidates);
    let supports: Vec<BTreeSet<&str>> = candidates.iter().map(support).collect();
    let mut covered: BTreeSet<&str> = BTreeSet::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut total = 0.0;
    while chosen.len() < budget.min(candidates.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in supports.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let gain: f64 = s.difference(&covered).map(|f| importance[*f]).sum();
            let better = match best {
                None => true,
                Some((b, g)) => {
                    gain > g || (gain == g && candidates[i].instance < candidates[b].instance)
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.expect("unpicked candidate remains");
        covered.extend(supports[i].iter().copied());
        total += gain;
        chosen.push(i);
    }
    Ok(GlobalSummary {
        picked: chosen.iter().map(|&i| candidates[i].instance.clone()).collect(),
        explanations: chosen.iter().map(|&i| candidates[i].clone()).collect(),
        coverage: total,
        total_importance: importance.values().sum(),
        importance,
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::super::lime::{FeatureWeight, LimeConfig};
    use super::*;

    pub(crate) fn expl(id: &str, weights: &[(&str, f64)]) -> Explanation {
        Explanation {
            instance: id.into(),
            class: 0,
            weights: weights
                .iter()
                .enumerate()
                .map(|(index, (f, w))| FeatureWeight {
                    feature: f.to_string(),
                    index,
                    weight: *w,
                })
                .collect(),
            intercept: 0.0,
            fidelity: Some(1.0),
            kernel_width: 1.0,
            flag: None,
            config: LimeConfig::new(3, 10, 0),
        }
    }

    #[test]
    fn picks_largest_disjoint_supports() {
        // importances sqrt(9)=3, sqrt(4)=2, sqrt(1)=1
        let c = vec![expl("a", &[("f1", 1.0)]), expl("b", &[("f3", 9.0)]), expl("c", &[("f2", -4.0)])];
        let s = submodular_pick(&c, 2).unwrap();
        assert_eq!(s.picked, vec!["b", "c"]);
        assert!((s.coverage - 5.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_and_duplicates() {
        let c = vec![expl("a", &[("f1", 1.0), ("f2", 0.5)]), expl("b", &[("f2", 0.2), ("f3", 0.1)])];
        let s = submodular_pick(&c, 5).unwrap();
        assert!((s.coverage - s.total_importance).abs() < 1e-12);
        assert_eq!(s.picked.len(), 2);
        let d = vec![expl("x", &[("f1", 1.0)]), expl("y", &[("f1", 1.0)])];
        let one = submodular_pick(&d, 1).unwrap();
        let two = submodular_pick(&d, 2).unwrap();
        assert_eq!(one.coverage, two.coverage);
        assert_eq!(one.picked, vec!["x"]);
    }

    #[test]
    fn ties_go_to_smaller_id_and_errors() {
        let c = vec![expl("b", &[("f1", 1.0)]), expl("a", &[("f2", 1.0)])];
        assert_eq!(submodular_pick(&c, 1).unwrap().picked, vec!["a"]);
        assert!(submodular_pick(&[], 1).is_err());
        assert!(submodular_pick(&c, 0).is_err());
    }
}
