//! Tensor (M x T x F) and flattened (M x F*L) encodings of a cleaned log,
//! plus stratified splitting.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{Container, Tensor};
use crate::error::{Error, Result};
use crate::eventlog::{Attribute, Case, Event, EventLog};

pub const DEFAULT_WINDOW: usize = 64;

/// Per-attribute token tables. Index 0 is reserved for padding and unknown
/// tokens; real tokens start at 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<Attribute, Vec<String>>", into = "BTreeMap<Attribute, Vec<String>>")]
pub struct Vocabulary {
    tokens: BTreeMap<Attribute, Vec<String>>,
    lookup: HashMap<Attribute, HashMap<String, usize>>,
}

impl From<BTreeMap<Attribute, Vec<String>>> for Vocabulary {
    fn from(tokens: BTreeMap<Attribute, Vec<String>>) -> Self {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for BTreeMap<Attribute, Vec<String>> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn from_tokens(tokens: BTreeMap<Attribute, Vec<String>>) -> Self {
        let mut v = Vocabulary {
            tokens,
            lookup: HashMap::new(),
        };
        v.reindex();
        v
    }

    fn reindex(&mut self) {
        self.lookup = self
            .tokens
            .iter()
            .map(|(&a, toks)| {
                let m = toks
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), i + 1))
                    .collect();
                (a, m)
            })
            .collect();
    }

    pub fn features(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.tokens.keys().copied()
    }

    pub fn feature_count(&self) -> usize {
        self.tokens.len()
    }

    /// Index of `token`, or `None` when unseen.
    pub fn index(&self, attr: Attribute, token: &str) -> Option<usize> {
        self.lookup.get(&attr)?.get(token).copied()
    }

    pub fn token(&self, attr: Attribute, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.tokens.get(&attr)?.get(i))
            .map(String::as_str)
    }

    /// Number of indices including the reserved 0.
    pub fn cardinality(&self, attr: Attribute) -> usize {
        self.tokens.get(&attr).map_or(1, |t| t.len() + 1)
    }
}

/// Indexes tokens of each categorical attribute by descending frequency, then
/// lexicographically. Event attributes count per event, case attributes per
/// case.
pub fn build_vocab(log: &EventLog, categorical: &[Attribute]) -> Vocabulary {
    let mut tokens = BTreeMap::new();
    for &attr in categorical {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for case in &log.cases {
            if attr.is_static() {
                if let Some(e) = case.events.first() {
                    *counts.entry(attr.token(case, e)).or_insert(0) += 1;
                }
            } else {
                for e in &case.events {
                    *counts.entry(attr.token(case, e)).or_insert(0) += 1;
                }
            }
        }
        let mut sorted: Vec<(&str, usize)> = counts.into_iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        tokens.insert(attr, sorted.into_iter().map(|(t, _)| t.to_string()).collect());
    }
    Vocabulary::from_tokens(tokens)
}

/// Which attributes enter the encodings. Dynamic attributes vary per event;
/// static ones are case-level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub dynamic: Vec<Attribute>,
    pub statics: Vec<Attribute>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            dynamic: vec![
                Attribute::Activity,
                Attribute::Department,
                Attribute::NumExecutions,
                Attribute::ActivityCode,
                Attribute::ProducerCode,
                Attribute::Section,
            ],
            statics: vec![
                Attribute::Age,
                Attribute::Years,
                Attribute::TreatmentCode,
                Attribute::CombinationId,
            ],
        }
    }
}

impl FeatureSpec {
    pub fn all(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.dynamic.iter().chain(&self.statics).copied()
    }

    pub fn categorical(&self) -> Vec<Attribute> {
        self.all().filter(|a| a.is_categorical()).collect()
    }

    pub fn numeric(&self) -> Vec<Attribute> {
        self.all().filter(|a| !a.is_categorical()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical { cardinality: usize },
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub attribute: Attribute,
    pub kind: FeatureKind,
}

/// Min-max statistics of numeric attributes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub ranges: BTreeMap<Attribute, (f64, f64)>,
}

impl Scaler {
    /// Fits on the cases at `rows` (all cases when `None`).
    pub fn fit(log: &EventLog, numeric: &[Attribute], rows: Option<&[usize]>) -> Self {
        let cases: Vec<&Case> = match rows {
            Some(r) => r.iter().map(|&i| &log.cases[i]).collect(),
            None => log.cases.iter().collect(),
        };
        let mut ranges = BTreeMap::new();
        for &attr in numeric {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for case in &cases {
                for e in &case.events {
                    let v = attr.numeric(case, e);
                    lo = lo.min(v);
                    hi = hi.max(v);
                    if attr.is_static() {
                        break;
                    }
                }
            }
            if lo.is_finite() && hi.is_finite() {
                ranges.insert(attr, (lo, hi));
            }
        }
        Scaler { ranges }
    }

    /// Maps the fitted minimum to 0 and maximum to 1; zero-range features map
    /// to 0. Count attributes are clamped at 0 from below.
    pub fn scale(&self, attr: Attribute, v: f64) -> f64 {
        let Some(&(lo, hi)) = self.ranges.get(&attr) else {
            return 0.0;
        };
        if hi - lo <= 0.0 {
            return 0.0;
        }
        let s = (v - lo) / (hi - lo);
        if attr == Attribute::NumExecutions {
            s.max(0.0)
        } else {
            s
        }
    }
}

/// Encoding configuration shared by both representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub vocab: Vocabulary,
    pub features: FeatureSpec,
    pub scaler: Scaler,
    pub window: usize,
    pub label_names: Vec<String>,
}

impl Encoder {
    /// Builds vocabulary and scaler from `log`; `train_rows` restricts the
    /// scaling statistics to the training split.
    pub fn fit(
        log: &EventLog,
        features: FeatureSpec,
        window: usize,
        train_rows: Option<&[usize]>,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("window length must be >= 1".into()));
        }
        if log.is_empty() {
            return Err(Error::EmptyLog("cannot fit an encoder on an empty log".into()));
        }
        let vocab = build_vocab(log, &features.categorical());
        let scaler = Scaler::fit(log, &features.numeric(), train_rows);
        Ok(Encoder {
            vocab,
            label_names: log.labels(),
            features,
            scaler,
            window,
        })
    }

    pub fn feature_info(&self) -> Vec<FeatureInfo> {
        self.features
            .all()
            .map(|attribute| FeatureInfo {
                attribute,
                kind: if attribute.is_categorical() {
                    FeatureKind::Categorical {
                        cardinality: self.vocab.cardinality(attribute),
                    }
                } else {
                    FeatureKind::Numeric
                },
            })
            .collect()
    }

    fn value(&self, attr: Attribute, case: &Case, event: &Event, unknown: &mut usize) -> f64 {
        if attr.is_categorical() {
            match self.vocab.index(attr, attr.token(case, event)) {
                Some(i) => i as f64,
                None => {
                    *unknown += 1;
                    0.0
                }
            }
        } else {
            self.scaler.scale(attr, attr.numeric(case, event))
        }
    }

    fn labels(&self, log: &EventLog) -> Result<Vec<usize>> {
        log.cases
            .iter()
            .map(|c| {
                let label = c.diagnosis_code.as_deref().ok_or_else(|| {
                    Error::InvalidArgument(format!("case `{}` is unlabeled", c.case_id))
                })?;
                self.label_names
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown label `{label}`")))
            })
            .collect()
    }

    /// Padded tensor encoding: the first `window` events of each case are
    /// kept, shorter cases are zero-padded with `mask = false`, and static
    /// attributes are replicated on every real timestep.
    pub fn sequences(&self, log: &EventLog) -> Result<SequenceDataset> {
        let m = log.len();
        let t = self.window;
        let attrs: Vec<Attribute> = self.features.all().collect();
        let f = attrs.len();
        let mut x = Array3::zeros((m, t, f));
        let mut mask = Array2::from_elem((m, t), false);
        let mut unknown = 0;
        for (i, case) in log.cases.iter().enumerate() {
            for (step, event) in case.events.iter().take(t).enumerate() {
                mask[[i, step]] = true;
                for (k, &attr) in attrs.iter().enumerate() {
                    x[[i, step, k]] = self.value(attr, case, event, &mut unknown);
                }
            }
        }
        Ok(SequenceDataset {
            x,
            mask,
            y: self.labels(log)?,
            window: t,
            features: self.feature_info(),
            label_names: self.label_names.clone(),
            case_ids: log.cases.iter().map(|c| c.case_id.clone()).collect(),
            unknown_tokens: unknown,
        })
    }

    /// Flattened encoding: timestep-major dynamic columns named
    /// `<feature>_<position>`, then one column per static attribute.
    pub fn flat(&self, log: &EventLog) -> Result<FlatDataset> {
        let l = self.window;
        let dynamic = &self.features.dynamic;
        let statics = &self.features.statics;
        let width = dynamic.len() * l + statics.len();
        let mut columns = Vec::with_capacity(width);
        for pos in 0..l {
            for &attr in dynamic {
                columns.push(Column {
                    name: format!("{}_{}", attr.label(), pos),
                    attribute: attr,
                    position: Some(pos),
                    categorical: attr.is_categorical(),
                });
            }
        }
        for &attr in statics {
            columns.push(Column {
                name: attr.label().to_string(),
                attribute: attr,
                position: None,
                categorical: attr.is_categorical(),
            });
        }
        let mut x = Array2::zeros((log.len(), width));
        let mut unknown = 0;
        for (i, case) in log.cases.iter().enumerate() {
            for (pos, event) in case.events.iter().take(l).enumerate() {
                for (k, &attr) in dynamic.iter().enumerate() {
                    x[[i, pos * dynamic.len() + k]] = self.value(attr, case, event, &mut unknown);
                }
            }
            let first = &case.events[0];
            for (k, &attr) in statics.iter().enumerate() {
                x[[i, dynamic.len() * l + k]] = self.value(attr, case, first, &mut unknown);
            }
        }
        Ok(FlatDataset {
            x,
            y: self.labels(log)?,
            columns,
            label_names: self.label_names.clone(),
            case_ids: log.cases.iter().map(|c| c.case_id.clone()).collect(),
            unknown_tokens: unknown,
        })
    }
}

/// Tensor encoding with whole-log scaling statistics.
pub fn encode_sequences(log: &EventLog, vocab: &Vocabulary, window: usize) -> Result<SequenceDataset> {
    let features = FeatureSpec::default();
    let mut enc = Encoder::fit(log, features, window, None)?;
    enc.vocab = vocab.clone();
    enc.sequences(log)
}

/// Flat encoding with whole-log scaling statistics.
pub fn encode_flat(log: &EventLog, vocab: &Vocabulary, window: usize) -> Result<FlatDataset> {
    let features = FeatureSpec::default();
    let mut enc = Encoder::fit(log, features, window, None)?;
    enc.vocab = vocab.clone();
    enc.flat(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    pub x: Array3<f64>,
    /// `true` on real events; always a prefix of each row.
    pub mask: Array2<bool>,
    pub y: Vec<usize>,
    pub window: usize,
    pub features: Vec<FeatureInfo>,
    pub label_names: Vec<String>,
    pub case_ids: Vec<String>,
    pub unknown_tokens: usize,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    /// Number of real events of row `i`.
    pub fn length(&self, i: usize) -> usize {
        self.mask.row(i).iter().take_while(|&&m| m).count()
    }

    pub fn subset(&self, rows: &[usize]) -> SequenceDataset {
        SequenceDataset {
            x: self.x.select(ndarray::Axis(0), rows),
            mask: self.mask.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            window: self.window,
            features: self.features.clone(),
            label_names: self.label_names.clone(),
            case_ids: rows.iter().map(|&r| self.case_ids[r].clone()).collect(),
            unknown_tokens: self.unknown_tokens,
        }
    }

    /// Re-pads every row to a new window length. Rows longer than `window`
    /// are truncated.
    pub fn repad(&self, window: usize) -> SequenceDataset {
        let (m, t, f) = self.x.dim();
        let mut x = Array3::zeros((m, window, f));
        let mut mask = Array2::from_elem((m, window), false);
        for i in 0..m {
            for s in 0..t.min(window) {
                mask[[i, s]] = self.mask[[i, s]];
                for k in 0..f {
                    x[[i, s, k]] = self.x[[i, s, k]];
                }
            }
        }
        SequenceDataset {
            x,
            mask,
            window,
            ..self.clone()
        }
    }

    pub fn to_container(&self) -> Container {
        let (m, t, f) = self.x.dim();
        let mut c = Container::new();
        c.push(Tensor::new("x", vec![m, t, f], self.x.iter().copied().collect()).expect("shape"));
        c.push(
            Tensor::new("mask", vec![m, t], self.mask.iter().map(|&b| b as u8 as f64).collect())
                .expect("shape"),
        );
        c.push(Tensor::new("y", vec![m], self.y.iter().map(|&v| v as f64).collect()).expect("shape"));
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub attribute: Attribute,
    /// Sequence position for dynamic columns.
    pub position: Option<usize>,
    pub categorical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatDataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub columns: Vec<Column>,
    pub label_names: Vec<String>,
    pub case_ids: Vec<String>,
    pub unknown_tokens: usize,
}

impl FlatDataset {
    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> FlatDataset {
        FlatDataset {
            x: self.x.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            columns: self.columns.clone(),
            label_names: self.label_names.clone(),
            case_ids: rows.iter().map(|&r| self.case_ids[r].clone()).collect(),
            unknown_tokens: self.unknown_tokens,
        }
    }

    pub fn to_container(&self) -> Container {
        let (m, w) = self.x.dim();
        let mut c = Container::new();
        c.push(Tensor::new("x", vec![m, w], self.x.iter().copied().collect()).expect("shape"));
        c.push(Tensor::new("y", vec![m], self.y.iter().map(|&v| v as f64).collect()).expect("shape"));
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_members(y: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    by_class
}

/// Per-class shuffled split. Each class contributes `round(n * fraction)`
/// test rows, clamped to `1..n-1`.
pub fn stratified_split(y: &[usize], test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut members) in class_members(y) {
        let n = members.len();
        if n < 2 {
            return Err(Error::SingletonClass(class.to_string()));
        }
        members.shuffle(&mut rng);
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        split.test.extend_from_slice(&members[..n_test]);
        split.train.extend_from_slice(&members[n_test..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified k-fold partition; fold `i` is the test part of split `i`.
pub fn stratified_kfold(y: &[usize], k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k-fold needs k >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; y.len()];
    let mut offset = 0;
    for (_, mut members) in class_members(y) {
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset += members.len();
    }
    Ok((0..k)
        .map(|fold| Split {
            train: (0..y.len()).filter(|&i| fold_of[i] != fold).collect(),
            test: (0..y.len()).filter(|&i| fold_of[i] == fold).collect(),
        })
        .filter(|s| !s.test.is_empty() && !s.train.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::{Case, Event};
    use proptest::prelude::*;

    fn case(id: &str, label: &str, acts: &[&str]) -> Case {
        let events = acts
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut e = Event::new(*a, i as i64 * 3600);
                e.num_executions = (i % 3 + 1) as u32;
                e
            })
            .collect();
        Case::new(id, events).with_label(label)
    }

    fn activity_only() -> FeatureSpec {
        FeatureSpec {
            dynamic: vec![Attribute::Activity],
            statics: vec![Attribute::Age],
        }
    }

    #[test]
    fn vocab_frequency_order() {
        let log = EventLog::from_cases(vec![
            case("1", "x", &["A", "A", "B", "A"]),
            case("2", "x", &["A", "B", "A"]),
        ])
        .unwrap();
        let v = build_vocab(&log, &[Attribute::Activity]);
        assert_eq!(v.index(Attribute::Activity, "A"), Some(1));
        assert_eq!(v.index(Attribute::Activity, "B"), Some(2));
        assert_eq!(v.token(Attribute::Activity, 0), None);
    }

    #[test]
    fn vocab_ties_are_lexicographic_and_empty_list_is_empty() {
        let log = EventLog::from_cases(vec![case("1", "x", &["B", "A", "B", "A", "A", "B"])]).unwrap();
        let v = build_vocab(&log, &[Attribute::Activity]);
        assert_eq!(v.index(Attribute::Activity, "A"), Some(1));
        assert_eq!(build_vocab(&log, &[]).feature_count(), 0);
    }

    #[test]
    fn short_case_is_padded_with_false_mask() {
        let log = EventLog::from_cases(vec![case("1", "x", &["A", "B"])]).unwrap();
        let enc = Encoder::fit(&log, activity_only(), 4, None).unwrap();
        let ds = enc.sequences(&log).unwrap();
        let mask: Vec<bool> = ds.mask.row(0).to_vec();
        assert_eq!(mask, vec![true, true, false, false]);
        assert_eq!(ds.x[[0, 2, 0]], 0.0);
        assert_eq!(ds.length(0), 2);
    }

    #[test]
    fn long_case_keeps_first_events() {
        let acts: Vec<String> = (0..300).map(|i| format!("a{i}")).collect();
        let refs: Vec<&str> = acts.iter().map(String::as_str).collect();
        let log = EventLog::from_cases(vec![case("1", "x", &refs)]).unwrap();
        let enc = Encoder::fit(&log, activity_only(), 64, None).unwrap();
        let ds = enc.sequences(&log).unwrap();
        assert!(ds.mask.iter().all(|&m| m));
        for s in 0..64 {
            let idx = ds.x[[0, s, 0]] as usize;
            assert_eq!(enc.vocab.token(Attribute::Activity, idx), Some(acts[s].as_str()));
        }
    }

    #[test]
    fn constant_numeric_scales_to_zero() {
        let mut a = case("1", "x", &["A"]);
        a.age = 50;
        let mut b = case("2", "x", &["B"]);
        b.age = 50;
        let log = EventLog::from_cases(vec![a, b]).unwrap();
        let enc = Encoder::fit(&log, activity_only(), 2, None).unwrap();
        let ds = enc.sequences(&log).unwrap();
        assert_eq!(ds.x[[0, 0, 1]], 0.0);
        assert_eq!(ds.x[[1, 0, 1]], 0.0);
    }

    #[test]
    fn train_split_scaling_maps_extremes_exactly() {
        let mut cases = Vec::new();
        for (i, age) in [20u32, 40, 60, 90].into_iter().enumerate() {
            let mut c = case(&i.to_string(), "x", &["A"]);
            c.age = age;
            cases.push(c);
        }
        let log = EventLog::from_cases(cases).unwrap();
        let enc = Encoder::fit(&log, activity_only(), 1, Some(&[1, 2])).unwrap();
        let ds = enc.sequences(&log).unwrap();
        assert_eq!(ds.x[[1, 0, 1]], 0.0);
        assert_eq!(ds.x[[2, 0, 1]], 1.0);
        assert!(ds.x[[3, 0, 1]] > 1.0);
        assert!(ds.x[[0, 0, 1]] < 0.0);
    }

    #[test]
    fn unknown_tokens_map_to_zero_and_are_counted() {
        let train = EventLog::from_cases(vec![case("1", "x", &["A"])]).unwrap();
        let other = EventLog::from_cases(vec![case("2", "x", &["Z", "A"])]).unwrap();
        let enc = Encoder::fit(&train, activity_only(), 2, None).unwrap();
        let ds = enc.sequences(&other).unwrap();
        assert_eq!(ds.unknown_tokens, 1);
        assert_eq!(ds.x[[0, 0, 0]], 0.0);
        assert_eq!(ds.x[[0, 1, 0]], 1.0);
    }

    #[test]
    fn flat_row_layout_and_names() {
        let log = EventLog::from_cases(vec![
            case("1", "x", &["A", "B"]),
            case("2", "x", &["A", "A", "B", "B", "B"]),
        ])
        .unwrap();
        let mut enc = Encoder::fit(&log, activity_only(), 3, None).unwrap();
        enc.vocab = Vocabulary::from_tokens(BTreeMap::from([(
            Attribute::Activity,
            vec!["A".to_string(), "B".to_string()],
        )]));
        let flat = enc.flat(&log).unwrap();
        assert_eq!(flat.x.row(0).to_vec()[..3], [1.0, 2.0, 0.0]);
        let names = flat.feature_names();
        assert_eq!(
            names,
            vec!["Activity Coded_0", "Activity Coded_1", "Activity Coded_2", "Age"]
        );
        let one = Encoder { window: 1, ..enc }.flat(&log).unwrap();
        assert_eq!(one.columns.len(), 2);
    }

    #[test]
    fn default_flat_width_and_unique_names() {
        let log = EventLog::from_cases(vec![case("1", "x", &["A", "B"])]).unwrap();
        let enc = Encoder::fit(&log, FeatureSpec::default(), 5, None).unwrap();
        let flat = enc.flat(&log).unwrap();
        assert_eq!(flat.columns.len(), 6 * 5 + 4);
        let mut names = flat.feature_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 34);
    }

    #[test]
    fn split_examples() {
        let s = stratified_split(&[0; 10], 0.2, 7).unwrap();
        assert_eq!((s.test.len(), s.train.len()), (2, 8));
        assert_eq!(s, stratified_split(&[0; 10], 0.2, 7).unwrap());
        let y = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let s = stratified_split(&y, 0.2, 1).unwrap();
        assert_eq!(s.test.iter().filter(|&&i| y[i] == 0).count(), 1);
        assert_eq!(s.test.iter().filter(|&&i| y[i] == 1).count(), 1);
        assert!(matches!(
            stratified_split(&[0, 0, 1], 0.2, 1),
            Err(Error::SingletonClass(c)) if c == "1"
        ));
    }

    #[test]
    fn kfold_partitions_rows() {
        let y: Vec<usize> = (0..23).map(|i| i % 3).collect();
        let folds = stratified_kfold(&y, 5, 3).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn split_partitions_and_respects_fraction(
            sizes in proptest::collection::vec(2usize..30, 1..5),
            frac in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let y: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
            let s = stratified_split(&y, frac, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
            for (c, &n) in sizes.iter().enumerate() {
                let t = s.test.iter().filter(|&&i| y[i] == c).count() as f64;
                prop_assert!((t - n as f64 * frac).abs() <= 1.0);
            }
        }

        #[test]
        fn flat_matches_flattened_sequences_and_decodes(
            lens in proptest::collection::vec(1usize..9, 1..6),
            window in 1usize..8,
            seed in any::<u64>(),
        ) {
            let pool = ["A", "B", "C", "D", "E"];
            let cases: Vec<Case> = lens.iter().enumerate().map(|(i, &n)| {
                let acts: Vec<&str> = (0..n).map(|k| pool[(seed as usize).wrapping_add(k * 7 + i) % 5]).collect();
                case(&i.to_string(), "x", &acts)
            }).collect();
            let log = EventLog::from_cases(cases).unwrap();
            let enc = Encoder::fit(&log, FeatureSpec::default(), window, None).unwrap();
            let seq = enc.sequences(&log).unwrap();
            let flat = enc.flat(&log).unwrap();
            let nd = enc.features.dynamic.len();
            for i in 0..log.len() {
                for t in 0..window {
                    for k in 0..nd {
                        prop_assert_eq!(flat.x[[i, t * nd + k]], seq.x[[i, t, k]]);
                    }
                }
                let decoded: Vec<&str> = (0..seq.length(i))
                    .map(|t| enc.vocab.token(Attribute::Activity, seq.x[[i, t, 0]] as usize).unwrap())
                    .collect();
                let original: Vec<&str> = log.cases[i].events.iter().take(window).map(|e| e.activity.as_str()).collect();
                prop_assert_eq!(decoded, original);
            }
        }
    }
}
