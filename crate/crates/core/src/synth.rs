//! Synthetic event logs with planted class signals.
//!
//! Every case of a class carries that class's motif at a fixed position,
//! surrounded by noise activities. An optional age rule ties one class to
//! ages above a threshold.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{Attribute, Case, Event, EventLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: String,
    /// Empty only for the age-rule class, whose cases then carry the motifs
    /// of the other classes in turn and are told apart by age alone.
    pub motif: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeRule {
    pub class: String,
    /// Cases of `class` are strictly older, all others at most this age.
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: Vec<ClassSpec>,
    pub cases_per_class: usize,
    /// Index of the first motif event.
    pub motif_position: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub noise_vocab: usize,
    #[serde(default)]
    pub age_rule: Option<AgeRule>,
}

impl SyntheticSpec {
    /// Three classes with disjoint 3-token motifs.
    pub fn disjoint_motifs() -> Self {
        SyntheticSpec {
            classes: ["A", "B", "C"]
                .iter()
                .map(|c| ClassSpec {
                    label: (*c).to_string(),
                    motif: (1..=3).map(|k| format!("{c}{k}")).collect(),
                })
                .collect(),
            cases_per_class: 50,
            motif_position: 2,
            min_length: 6,
            max_length: 10,
            noise_vocab: 8,
            age_rule: None,
        }
    }

    /// The disjoint-motif spec plus a motif-less class `R` defined by
    /// `age > 70`.
    pub fn planted() -> Self {
        let mut spec = Self::disjoint_motifs();
        spec.classes.push(ClassSpec {
            label: "R".into(),
            motif: Vec::new(),
        });
        spec.age_rule = Some(AgeRule {
            class: "R".into(),
            threshold: 70,
        });
        spec
    }

    /// Two classes whose motifs are the same tokens in opposite order.
    pub fn order_only() -> Self {
        let motif: Vec<String> = ["X", "Y", "Z"].iter().map(|s| (*s).to_string()).collect();
        let mut reversed = motif.clone();
        reversed.reverse();
        SyntheticSpec {
            classes: vec![
                ClassSpec {
                    label: "fwd".into(),
                    motif,
                },
                ClassSpec {
                    label: "rev".into(),
                    motif: reversed,
                },
            ],
            cases_per_class: 100,
            motif_position: 2,
            min_length: 6,
            max_length: 10,
            noise_vocab: 6,
            age_rule: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Config("synthetic spec needs at least 2 classes".into()));
        }
        if self.cases_per_class < 4 {
            return Err(Error::Config("cases_per_class must be >= 4".into()));
        }
        if self.min_length == 0 || self.min_length > self.max_length {
            return Err(Error::Config("need 1 <= min_length <= max_length".into()));
        }
        let labels: BTreeSet<&str> = self.classes.iter().map(|c| c.label.as_str()).collect();
        if labels.len() != self.classes.len() {
            return Err(Error::Config("class labels must be distinct".into()));
        }
        let motifs: BTreeSet<&Vec<String>> = self.classes.iter().map(|c| &c.motif).collect();
        if motifs.len() != self.classes.len() {
            return Err(Error::Config("motifs must be pairwise distinct".into()));
        }
        for c in self.classes.iter().filter(|c| c.motif.is_empty()) {
            if self.age_rule.as_ref().is_none_or(|r| r.class != c.label) {
                return Err(Error::Config(format!("class `{}` has neither a motif nor the age rule", c.label)));
            }
        }
        for c in &self.classes {
            if self.motif_position + c.motif.len() > self.min_length {
                return Err(Error::Config(format!(
                    "motif of `{}` ends at {} but cases may be only {} events long",
                    c.label,
                    self.motif_position + c.motif.len(),
                    self.min_length
                )));
            }
        }
        if let Some(rule) = &self.age_rule {
            if !labels.contains(rule.class.as_str()) {
                return Err(Error::Config(format!("age rule names unknown class `{}`", rule.class)));
            }
            if rule.threshold < 18 || rule.threshold >= 95 {
                return Err(Error::Config("age threshold must lie in 18..95".into()));
            }
        }
        Ok(())
    }

    fn noise_token(k: usize) -> String {
        format!("n{k}")
    }
}

/// Planted truth recorded next to a generated log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub seed: u64,
    pub spec: SyntheticSpec,
    pub motifs: BTreeMap<String, Vec<String>>,
    /// Event positions holding motif tokens.
    pub motif_positions: Vec<usize>,
    /// Flat column names of the motif positions.
    pub motif_columns: Vec<String>,
    pub age_rule: Option<AgeRule>,
    /// Cases carrying another class's motif.
    pub borrowed: Vec<String>,
    pub cases: usize,
}

const DAY: i64 = 86_400;
const BASE: i64 = 1_293_840_000; // 2011-01-01

/// Generates `cases_per_class` cases per class in interleaved order.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(EventLog, SyntheticManifest)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    let carriers: Vec<&ClassSpec> = spec.classes.iter().filter(|c| !c.motif.is_empty()).collect();
    let mut borrowed = Vec::new();
    for i in 0..spec.cases_per_class {
        for own in &spec.classes {
            let class = if own.motif.is_empty() { carriers[i % carriers.len()] } else { own };
            let len = rng.random_range(spec.min_length..=spec.max_length);
            let start = BASE + rng.random_range(0..365) * DAY;
            let gap = rng.random_range(1..=60) * DAY;
            let events = (0..len)
                .map(|t| {
                    let activity = match t.checked_sub(spec.motif_position) {
                        Some(k) if k < class.motif.len() => class.motif[k].clone(),
                        _ => SyntheticSpec::noise_token(rng.random_range(0..spec.noise_vocab.max(1))),
                    };
                    let mut e = Event::new(activity, start + t as i64 * gap);
                    e.department = format!("D{}", rng.random_range(0..4));
                    e.num_executions = rng.random_range(1..=3);
                    e
                })
                .collect();
            let id = format!("{}-{i:04}", own.label);
            if own.motif.is_empty() {
                borrowed.push(id.clone());
            }
            let mut case = Case::new(id, events).with_label(&own.label);
            case.age = match &spec.age_rule {
                Some(rule) if rule.class == own.label => rng.random_range(rule.threshold + 1..=95),
                Some(rule) => rng.random_range(20..=rule.threshold),
                None => rng.random_range(20..=95),
            };
            case.treatment_code = format!("T{}", rng.random_range(0..3));
            case.combination_id = format!("K{}", rng.random_range(0..3));
            cases.push(case);
        }
    }
    let longest = spec.classes.iter().map(|c| c.motif.len()).max().unwrap_or(0);
    let motif_positions: Vec<usize> = (spec.motif_position..spec.motif_position + longest).collect();
    let manifest = SyntheticManifest {
        seed,
        spec: spec.clone(),
        motifs: spec.classes.iter().map(|c| (c.label.clone(), c.motif.clone())).collect(),
        motif_columns: motif_positions
            .iter()
            .map(|p| format!("{}_{p}", Attribute::Activity.label()))
            .collect(),
        motif_positions,
        age_rule: spec.age_rule.clone(),
        borrowed,
        cases: cases.len(),
    };
    Ok((EventLog::from_cases(cases)?, manifest))
}

/// Diagnosis-code case counts of the hospital log used for the class filter.
pub const HOSPITAL_CLASS_COUNTS: [(&str, usize); 11] = [
    ("M11", 60),
    ("M12", 13),
    ("M13", 195),
    ("M14", 95),
    ("M15", 11),
    ("M16", 128),
    ("106", 113),
    ("821", 29),
    ("822", 22),
    ("823", 8),
    ("839", 14),
];

/// A labeled log with exactly `counts[i].1` cases of class `counts[i].0`,
/// each a short random trace over a small activity vocabulary.
pub fn class_count_log(counts: &[(&str, usize)], seed: u64) -> Result<EventLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for (label, n) in counts {
        for i in 0..*n {
            let len = rng.random_range(2..=6);
            let start = BASE + rng.random_range(0..365) * DAY;
            let events = (0..len)
                .map(|t| {
                    let mut e = Event::new(SyntheticSpec::noise_token(rng.random_range(0..12)), start + t * DAY);
                    e.department = format!("D{}", rng.random_range(0..4));
                    e.num_executions = 1;
                    e
                })
                .collect();
            let mut case = Case::new(format!("{label}-{i:04}"), events).with_label(*label);
            case.age = rng.random_range(20..=95);
            case.treatment_code = format!("T{}", rng.random_range(0..3));
            case.combination_id = format!("K{}", rng.random_range(0..3));
            cases.push(case);
        }
    }
    EventLog::from_cases(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motifs_and_age_rule_are_planted() {
        let spec = SyntheticSpec::planted();
        let (log, manifest) = generate_synthetic(&spec, 3).unwrap();
        assert_eq!(log.len(), 200);
        assert_eq!(manifest.motif_columns, vec!["Activity Coded_2", "Activity Coded_3", "Activity Coded_4"]);
        assert_eq!(manifest.borrowed.len(), 50);
        for case in &log.cases {
            let label = case.diagnosis_code.as_deref().unwrap();
            let acts: Vec<&str> = case.events[2..5].iter().map(|e| e.activity.as_str()).collect();
            let carried = manifest.motifs.iter().find(|(_, m)| *m == &acts).unwrap().0;
            if label == "R" {
                assert!(manifest.borrowed.contains(&case.case_id));
                assert_ne!(carried, "R");
            } else {
                assert_eq!(carried, label);
            }
            assert_eq!(case.age > 70, label == "R");
            assert!((6..=10).contains(&case.events.len()));
        }
        assert_eq!(log.class_counts.values().copied().collect::<Vec<_>>(), vec![50; 4]);
    }

    #[test]
    fn order_only_classes_share_the_multiset() {
        let spec = SyntheticSpec::order_only();
        let mut a = spec.classes[0].motif.clone();
        let mut b = spec.classes[1].motif.clone();
        assert_ne!(a, b);
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = SyntheticSpec::disjoint_motifs();
        assert_eq!(generate_synthetic(&spec, 1).unwrap(), generate_synthetic(&spec, 1).unwrap());
        let long = SyntheticSpec {
            motif_position: 5,
            ..spec.clone()
        };
        assert!(generate_synthetic(&long, 1).is_err());
        let dup = SyntheticSpec {
            classes: vec![spec.classes[0].clone(), spec.classes[0].clone()],
            ..spec.clone()
        };
        assert!(dup.validate().is_err());
        let few = SyntheticSpec {
            cases_per_class: 3,
            ..spec
        };
        assert!(few.validate().is_err());
        let mut bare = SyntheticSpec::disjoint_motifs();
        bare.classes[0].motif.clear();
        assert!(bare.validate().is_err());
    }

    #[test]
    fn class_filter_keeps_hospital_classes() {
        let log = class_count_log(&HOSPITAL_CLASS_COUNTS, 0).unwrap();
        assert_eq!(log.len(), 688);
        let (cleaned, report) = crate::eventlog::clean_log(&log, 30).unwrap();
        let kept: Vec<&str> = report.kept_classes.iter().map(String::as_str).collect();
        assert_eq!(kept, vec!["106", "M11", "M13", "M14", "M16"]);
        assert_eq!(cleaned.len(), 60 + 195 + 95 + 128 + 113);
        assert_eq!(report.dropped_classes["821"], 29);
        assert_eq!(report.imputed_labels, 0);
    }
}
