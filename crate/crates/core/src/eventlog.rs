//! Case-centric event logs: CSV ingestion, cleaning, class filtering and the
//! feature correlation map.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// One recorded activity of a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub department: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub num_executions: u32,
    pub activity_code: String,
    pub producer_code: String,
    pub section: String,
}

impl Event {
    pub fn new(activity: impl Into<String>, timestamp: i64) -> Self {
        Event {
            activity: activity.into(),
            department: String::new(),
            timestamp,
            num_executions: 1,
            activity_code: String::new(),
            producer_code: String::new(),
            section: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub case_id: String,
    pub events: Vec<Event>,
    pub age: u32,
    pub diagnosis_code: Option<String>,
    pub treatment_code: String,
    pub combination_id: String,
    pub years_in_treatment: f64,
}

impl Case {
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Self {
        let mut case = Case {
            case_id: case_id.into(),
            events,
            age: 0,
            diagnosis_code: None,
            treatment_code: String::new(),
            combination_id: String::new(),
            years_in_treatment: 0.0,
        };
        case.normalize();
        case
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.diagnosis_code = Some(label.into());
        self
    }

    /// Stable-sorts events by timestamp and re-derives `years_in_treatment`.
    pub fn normalize(&mut self) {
        self.events.sort_by_key(|e| e.timestamp);
        self.years_in_treatment = derive_years(&self.events);
    }
}

fn derive_years(events: &[Event]) -> f64 {
    match (events.first(), events.last()) {
        (Some(a), Some(b)) => (b.timestamp - a.timestamp).max(0) as f64 / SECONDS_PER_YEAR,
        _ => 0.0,
    }
}

/// Counters for rows that could not be ingested as-is.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub bad_timestamps: usize,
    pub missing_case_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub cases: Vec<Case>,
    pub class_counts: BTreeMap<String, usize>,
    #[serde(default)]
    pub parse_report: ParseReport,
    /// Base names of attributes that were spread across `name:1..name:n` columns.
    #[serde(default)]
    pub spread_features: Vec<String>,
}

impl EventLog {
    /// Builds a log from in-memory cases, sorting events and checking ids.
    pub fn from_cases(mut cases: Vec<Case>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for case in &mut cases {
            if case.events.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "case `{}` has no events",
                    case.case_id
                )));
            }
            if !seen.insert(case.case_id.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate case id `{}`",
                    case.case_id
                )));
            }
            case.normalize();
        }
        let class_counts = count_classes(&cases);
        Ok(EventLog {
            cases,
            class_counts,
            parse_report: ParseReport::default(),
            spread_features: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.cases.iter().map(|c| c.events.len()).sum()
    }

    /// Sorted distinct labels of labeled cases.
    pub fn labels(&self) -> Vec<String> {
        self.class_counts.keys().cloned().collect()
    }

    fn recount(&mut self) {
        self.class_counts = count_classes(&self.cases);
    }
}

fn count_classes(cases: &[Case]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for label in cases.iter().filter_map(|c| c.diagnosis_code.as_ref()) {
        *counts.entry(label.clone()).or_insert(0) += 1;
    }
    counts
}

/// Maps log roles to CSV column names. Only `case_id`, `activity` and
/// `timestamp` are mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
    pub department: Option<String>,
    pub num_executions: Option<String>,
    pub activity_code: Option<String>,
    pub producer_code: Option<String>,
    pub section: Option<String>,
    pub age: Option<String>,
    pub diagnosis_code: Option<String>,
    pub treatment_code: Option<String>,
    pub combination_id: Option<String>,
}

impl Default for Schema {
    /// Column names of the BPI 2011 hospital log flattened to CSV.
    fn default() -> Self {
        Schema {
            case_id: "case_id".into(),
            activity: "Activity".into(),
            timestamp: "Timestamp".into(),
            department: Some("Department".into()),
            num_executions: Some("Number of executions".into()),
            activity_code: Some("Activity code".into()),
            producer_code: Some("Producer code".into()),
            section: Some("Section".into()),
            age: Some("Age".into()),
            diagnosis_code: Some("Diagnosis code".into()),
            treatment_code: Some("Treatment code".into()),
            combination_id: Some("Diagnosis Treatment Combination ID".into()),
        }
    }
}

impl Schema {
    /// Reads a schema from a JSON or TOML file (chosen by extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

/// Column positions for one attribute, including `name:k` spread siblings
/// ordered by suffix.
#[derive(Debug, Clone)]
struct Columns {
    positions: Vec<usize>,
}

impl Columns {
    fn locate(headers: &[String], base: &str) -> Option<Columns> {
        let mut found: Vec<(usize, usize)> = Vec::new();
        for (pos, h) in headers.iter().enumerate() {
            if h == base {
                found.push((0, pos));
            } else if let Some(rest) = h.strip_prefix(base).and_then(|r| r.strip_prefix(':')) {
                if let Ok(k) = rest.parse::<usize>() {
                    found.push((k, pos));
                }
            }
        }
        if found.is_empty() {
            return None;
        }
        found.sort();
        Some(Columns {
            positions: found.into_iter().map(|(_, p)| p).collect(),
        })
    }

    fn is_spread(&self) -> bool {
        self.positions.len() > 1
    }

    /// Last non-empty value across the spread columns.
    fn value<'r>(&self, record: &'r csv::StringRecord) -> Option<&'r str> {
        self.positions
            .iter()
            .rev()
            .filter_map(|&p| record.get(p))
            .map(str::trim)
            .find(|v| !v.is_empty())
    }
}

/// Parses ISO-8601 (with or without offset) and `YYYY-MM-DD HH:MM:SS` into
/// UTC seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.timestamp());
        }
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

#[derive(Default)]
struct CaseBuilder {
    events: Vec<(Event, usize)>,
    age: Vec<(usize, String)>,
    diagnosis: Vec<(usize, String)>,
    treatment: Vec<(usize, String)>,
    combination: Vec<(usize, String)>,
}

/// Reads a CSV event log (one event per row, case attributes repeated per
/// row). Cases are returned in order of first appearance.
pub fn parse_log(path: &Path, schema: &Schema) -> Result<EventLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log_reader(file, schema)
}

pub fn parse_log_reader<R: std::io::Read>(reader: R, schema: &Schema) -> Result<EventLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let required = |name: &str| {
        Columns::locate(&headers, name)
            .ok_or_else(|| Error::Schema(format!("missing mandatory column `{name}`")))
    };
    let case_col = required(&schema.case_id)?;
    let activity_col = required(&schema.activity)?;
    let ts_col = required(&schema.timestamp)?;
    let optional = |name: &Option<String>| name.as_deref().and_then(|n| Columns::locate(&headers, n));
    let department = optional(&schema.department);
    let executions = optional(&schema.num_executions);
    let activity_code = optional(&schema.activity_code);
    let producer_code = optional(&schema.producer_code);
    let section = optional(&schema.section);
    let age = optional(&schema.age);
    let diagnosis = optional(&schema.diagnosis_code);
    let treatment = optional(&schema.treatment_code);
    let combination = optional(&schema.combination_id);

    let mut spread_features = Vec::new();
    for (name, cols) in [
        (&schema.diagnosis_code, &diagnosis),
        (&schema.treatment_code, &treatment),
        (&schema.combination_id, &combination),
        (&schema.age, &age),
    ] {
        if let (Some(name), Some(cols)) = (name, cols) {
            if cols.is_spread() {
                spread_features.push(name.clone());
            }
        }
    }

    let mut report = ParseReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut builders: HashMap<String, CaseBuilder> = HashMap::new();
    let text = |cols: &Option<Columns>, rec: &csv::StringRecord| {
        cols.as_ref()
            .and_then(|c| c.value(rec))
            .unwrap_or("")
            .to_string()
    };

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        report.rows_read += 1;
        let Some(case_id) = case_col.value(&record) else {
            report.missing_case_id += 1;
            continue;
        };
        let Some(timestamp) = ts_col.value(&record).and_then(parse_timestamp) else {
            report.bad_timestamps += 1;
            continue;
        };
        let num_executions = executions
            .as_ref()
            .and_then(|c| c.value(&record))
            .and_then(|v| v.parse::<f64>().ok())
            .map(|v| v.max(1.0) as u32)
            .unwrap_or(1);
        let event = Event {
            activity: activity_col.value(&record).unwrap_or("").to_string(),
            department: text(&department, &record),
            timestamp,
            num_executions,
            activity_code: text(&activity_code, &record),
            producer_code: text(&producer_code, &record),
            section: text(&section, &record),
        };
        let builder = builders.entry(case_id.to_string()).or_insert_with(|| {
            order.push(case_id.to_string());
            CaseBuilder::default()
        });
        builder.events.push((event, row));
        for (cols, slot) in [
            (&age, &mut builder.age),
            (&diagnosis, &mut builder.diagnosis),
            (&treatment, &mut builder.treatment),
            (&combination, &mut builder.combination),
        ] {
            if let Some(v) = cols.as_ref().and_then(|c| c.value(&record)) {
                slot.push((row, v.to_string()));
            }
        }
    }

    let mut cases = Vec::with_capacity(order.len());
    for id in order {
        let mut b = builders.remove(&id).expect("builder exists for every ordered id");
        // Sort by (timestamp, file row) so "last recorded" is well defined.
        b.events.sort_by_key(|(e, row)| (e.timestamp, *row));
        let row_rank: HashMap<usize, usize> =
            b.events.iter().enumerate().map(|(i, (_, r))| (*r, i)).collect();
        let last = |vals: &[(usize, String)]| {
            vals.iter()
                .max_by_key(|(row, _)| row_rank[row])
                .map(|(_, v)| v.clone())
        };
        let age = last(&b.age)
            .and_then(|v| v.parse::<f64>().ok())
            .map(|v| v.max(0.0) as u32)
            .unwrap_or(0);
        let mut case = Case {
            case_id: id,
            events: b.events.into_iter().map(|(e, _)| e).collect(),
            age,
            diagnosis_code: last(&b.diagnosis),
            treatment_code: last(&b.treatment).unwrap_or_default(),
            combination_id: last(&b.combination).unwrap_or_default(),
            years_in_treatment: 0.0,
        };
        case.years_in_treatment = derive_years(&case.events);
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(Error::EmptyLog(format!(
            "no parseable rows ({} read, {} bad timestamps)",
            report.rows_read, report.bad_timestamps
        )));
    }
    let class_counts = count_classes(&cases);
    Ok(EventLog {
        cases,
        class_counts,
        parse_report: report,
        spread_features,
    })
}

/// Writes a log as CSV using the default [`Schema`] column names.
pub fn write_csv(log: &EventLog, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(log, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Lines starting with `#` are skipped by [`parse_log_reader`], so callers
/// may prepend comment lines.
pub fn write_csv_to<W: std::io::Write>(log: &EventLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let s = Schema::default();
    let opt = |o: &Option<String>| o.clone().unwrap_or_default();
    w.write_record([
        s.case_id.clone(),
        s.activity.clone(),
        s.timestamp.clone(),
        opt(&s.department),
        opt(&s.num_executions),
        opt(&s.activity_code),
        opt(&s.producer_code),
        opt(&s.section),
        opt(&s.age),
        opt(&s.diagnosis_code),
        opt(&s.treatment_code),
        opt(&s.combination_id),
    ])?;
    for case in &log.cases {
        for e in &case.events {
            let ts = DateTime::from_timestamp(e.timestamp, 0)
                .map(|d| d.format("%Y-%m-%d %H:%M:%S").to_string())
                .unwrap_or_default();
            w.write_record([
                case.case_id.as_str(),
                e.activity.as_str(),
                ts.as_str(),
                e.department.as_str(),
                &e.num_executions.to_string(),
                e.activity_code.as_str(),
                e.producer_code.as_str(),
                e.section.as_str(),
                &case.age.to_string(),
                case.diagnosis_code.as_deref().unwrap_or(""),
                case.treatment_code.as_str(),
                case.combination_id.as_str(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub original_cases: usize,
    pub imputed_labels: usize,
    /// Unlabeled cases with zero similarity to every labeled case.
    pub dropped_cases: usize,
    pub collapsed_features: Vec<String>,
    pub kept_classes: BTreeSet<String>,
    /// Classes under `min_class_count`, with the number of cases removed.
    pub dropped_classes: BTreeMap<String, usize>,
    pub unparseable_events: usize,
}

pub const DEFAULT_MIN_CLASS_COUNT: usize = 30;

/// Multiset Jaccard similarity over activities plus the treatment code.
fn profile(case: &Case) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for e in &case.events {
        *m.entry(format!("a:{}", e.activity)).or_insert(0) += 1;
    }
    if !case.treatment_code.is_empty() {
        *m.entry(format!("t:{}", case.treatment_code)).or_insert(0) += 1;
    }
    m
}

pub fn jaccard(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            union += cb;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Imputes missing labels from the most similar labeled case, re-derives
/// treatment durations and removes under-represented classes.
pub fn clean_log(log: &EventLog, min_class_count: usize) -> Result<(EventLog, CleaningReport)> {
    if min_class_count == 0 {
        return Err(Error::InvalidArgument("min_class_count must be >= 1".into()));
    }
    let mut report = CleaningReport {
        original_cases: log.cases.len(),
        collapsed_features: log.spread_features.clone(),
        unparseable_events: log.parse_report.bad_timestamps,
        ..Default::default()
    };
    let labeled: Vec<(&Case, BTreeMap<String, usize>)> = log
        .cases
        .iter()
        .filter(|c| c.diagnosis_code.is_some())
        .map(|c| (c, profile(c)))
        .collect();
    let has_unlabeled = log.cases.iter().any(|c| c.diagnosis_code.is_none());
    if labeled.is_empty() && has_unlabeled {
        return Err(Error::CannotImpute("no case carries a diagnosis label".into()));
    }
    let class_size = &log.class_counts;

    let mut cases = Vec::with_capacity(log.cases.len());
    for case in &log.cases {
        let mut case = case.clone();
        case.normalize();
        if case.diagnosis_code.is_none() {
            let p = profile(&case);
            let mut best: Option<(f64, usize, &str)> = None;
            for (other, q) in &labeled {
                let sim = jaccard(&p, q);
                let label = other.diagnosis_code.as_deref().expect("labeled");
                let size = class_size.get(label).copied().unwrap_or(0);
                let better = match best {
                    None => true,
                    Some((bs, bsize, blabel)) => {
                        sim > bs || (sim == bs && (size > bsize || (size == bsize && label < blabel)))
                    }
                };
                if better {
                    best = Some((sim, size, label));
                }
            }
            match best {
                Some((sim, _, label)) if sim > 0.0 => {
                    case.diagnosis_code = Some(label.to_string());
                    report.imputed_labels += 1;
                }
                _ => {
                    report.dropped_cases += 1;
                    continue;
                }
            }
        }
        cases.push(case);
    }

    let counts = count_classes(&cases);
    for (label, &n) in &counts {
        if n >= min_class_count {
            report.kept_classes.insert(label.clone());
        } else {
            report.dropped_classes.insert(label.clone(), n);
        }
    }
    cases.retain(|c| {
        c.diagnosis_code
            .as_ref()
            .is_some_and(|l| report.kept_classes.contains(l))
    });
    let mut cleaned = EventLog {
        cases,
        class_counts: BTreeMap::new(),
        parse_report: log.parse_report.clone(),
        spread_features: log.spread_features.clone(),
    };
    cleaned.recount();
    Ok((cleaned, report))
}

/// Attributes available for correlation and encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Activity,
    Department,
    NumExecutions,
    ActivityCode,
    ProducerCode,
    Section,
    Age,
    DiagnosisCode,
    TreatmentCode,
    CombinationId,
    Years,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Activity,
        Attribute::Department,
        Attribute::NumExecutions,
        Attribute::ActivityCode,
        Attribute::ProducerCode,
        Attribute::Section,
        Attribute::Age,
        Attribute::DiagnosisCode,
        Attribute::TreatmentCode,
        Attribute::CombinationId,
        Attribute::Years,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Attribute::Activity => "activity",
            Attribute::Department => "department",
            Attribute::NumExecutions => "num_executions",
            Attribute::ActivityCode => "activity_code",
            Attribute::ProducerCode => "producer_code",
            Attribute::Section => "section",
            Attribute::Age => "age",
            Attribute::DiagnosisCode => "diagnosis_code",
            Attribute::TreatmentCode => "treatment_code",
            Attribute::CombinationId => "combination_id",
            Attribute::Years => "years",
        }
    }

    /// Human-readable column label used in flat feature names and plots.
    pub fn label(self) -> &'static str {
        match self {
            Attribute::Activity => "Activity Coded",
            Attribute::Department => "Department Coded",
            Attribute::NumExecutions => "Number of executions",
            Attribute::ActivityCode => "Activity code",
            Attribute::ProducerCode => "Producer code",
            Attribute::Section => "Section",
            Attribute::Age => "Age",
            Attribute::DiagnosisCode => "Diagnosis code",
            Attribute::TreatmentCode => "Treatment",
            Attribute::CombinationId => "Combination ID",
            Attribute::Years => "years",
        }
    }

    pub fn from_key(key: &str) -> Option<Attribute> {
        Attribute::ALL.into_iter().find(|a| a.key() == key)
    }

    pub fn is_categorical(self) -> bool {
        !matches!(
            self,
            Attribute::NumExecutions | Attribute::Age | Attribute::Years
        )
    }

    /// Case-level attributes are constant across a case's events.
    pub fn is_static(self) -> bool {
        matches!(
            self,
            Attribute::Age
                | Attribute::DiagnosisCode
                | Attribute::TreatmentCode
                | Attribute::CombinationId
                | Attribute::Years
        )
    }

    pub fn token<'a>(self, case: &'a Case, event: &'a Event) -> &'a str {
        match self {
            Attribute::Activity => &event.activity,
            Attribute::Department => &event.department,
            Attribute::ActivityCode => &event.activity_code,
            Attribute::ProducerCode => &event.producer_code,
            Attribute::Section => &event.section,
            Attribute::DiagnosisCode => case.diagnosis_code.as_deref().unwrap_or(""),
            Attribute::TreatmentCode => &case.treatment_code,
            Attribute::CombinationId => &case.combination_id,
            Attribute::NumExecutions | Attribute::Age | Attribute::Years => "",
        }
    }

    pub fn numeric(self, case: &Case, event: &Event) -> f64 {
        match self {
            Attribute::NumExecutions => event.num_executions as f64,
            Attribute::Age => case.age as f64,
            Attribute::Years => case.years_in_treatment,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Features with zero variance; their off-diagonal entries are 0.
    pub zero_variance: Vec<String>,
}

/// Ranks categorical tokens by descending frequency (rank 1 = most frequent,
/// ties lexicographic).
fn frequency_ranks<'a>(tokens: impl Iterator<Item = &'a str>) -> HashMap<&'a str, f64> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut sorted: Vec<(&str, usize)> = counts.into_iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, (t, _))| (t, (i + 1) as f64))
        .collect()
}

/// Pearson correlation between attribute columns over all event rows, with
/// case attributes repeated per event.
pub fn correlation_matrix(log: &EventLog, features: &[Attribute]) -> Result<CorrelationMatrix> {
    if log.cases.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 2 cases".into(),
        ));
    }
    let rows: Vec<(&Case, &Event)> = log
        .cases
        .iter()
        .flat_map(|c| c.events.iter().map(move |e| (c, e)))
        .collect();
    let columns: Vec<Vec<f64>> = features
        .iter()
        .map(|&f| {
            if f.is_categorical() {
                let ranks = frequency_ranks(rows.iter().map(|(c, e)| f.token(c, e)));
                rows.iter().map(|(c, e)| ranks[f.token(c, e)]).collect()
            } else {
                rows.iter().map(|(c, e)| f.numeric(c, e)).collect()
            }
        })
        .collect();
    let names = features.iter().map(|f| f.key().to_string()).collect();
    Ok(pearson_matrix(names, &columns))
}

/// Correlation of raw numeric columns.
pub fn pearson_matrix(features: Vec<String>, columns: &[Vec<f64>]) -> CorrelationMatrix {
    let k = columns.len();
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|col| {
            let n = col.len().max(1) as f64;
            let mean = col.iter().sum::<f64>() / n;
            let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let ss = c.iter().map(|v| v * v).sum::<f64>();
            (c, ss.sqrt())
        })
        .collect();
    let degenerate: Vec<bool> = centered
        .iter()
        .map(|(_, norm)| *norm <= 1e-12 || !norm.is_finite())
        .collect();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in 0..i {
            let r = if degenerate[i] || degenerate[j] {
                0.0
            } else {
                let dot: f64 = centered[i].0.iter().zip(&centered[j].0).map(|(a, b)| a * b).sum();
                (dot / (centered[i].1 * centered[j].1)).clamp(-1.0, 1.0)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    let zero_variance = features
        .iter()
        .zip(&degenerate)
        .filter(|(_, &d)| d)
        .map(|(n, _)| n.clone())
        .collect();
    CorrelationMatrix {
        features,
        values,
        zero_variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(activity: &str, ts: i64) -> Event {
        Event::new(activity, ts)
    }

    #[test]
    fn parses_three_rows_into_one_case() {
        let csv = "case_id,Activity,Timestamp\nc1,A,2005-01-03 00:00:00\nc1,B,2005-01-04T10:00:00\nc1,C,2005-01-05\n";
        let log = parse_log_reader(csv.as_bytes(), &Schema::default()).unwrap();
        assert_eq!(log.cases.len(), 1);
        assert_eq!(log.cases[0].events.len(), 3);
    }

    #[test]
    fn sorts_out_of_order_rows() {
        let csv = "case_id,Activity,Timestamp\nc1,late,2006-01-01 00:00:00\nc1,early,2005-01-01 00:00:00\nc1,mid,2005-06-01T00:00:00+01:00\n";
        let log = parse_log_reader(csv.as_bytes(), &Schema::default()).unwrap();
        let acts: Vec<_> = log.cases[0].events.iter().map(|e| e.activity.as_str()).collect();
        assert_eq!(acts, ["early", "mid", "late"]);
        assert!(log.cases[0].years_in_treatment > 0.99);
    }

    #[test]
    fn missing_mandatory_column_is_schema_error() {
        let csv = "case_id,Activity\nc1,A\n";
        let err = parse_log_reader(csv.as_bytes(), &Schema::default()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn unparseable_timestamps_are_counted() {
        let csv = "case_id,Activity,Timestamp\nc1,A,yesterday\nc1,B,2005-01-01\n";
        let log = parse_log_reader(csv.as_bytes(), &Schema::default()).unwrap();
        assert_eq!(log.parse_report.bad_timestamps, 1);
        assert_eq!(log.event_count(), 1);
        let only_bad = "case_id,Activity,Timestamp\nc1,A,never\n";
        assert!(matches!(
            parse_log_reader(only_bad.as_bytes(), &Schema::default()),
            Err(Error::EmptyLog(_))
        ));
    }

    #[test]
    fn spread_columns_collapse_to_last_recorded() {
        let csv = "case_id,Activity,Timestamp,Treatment code,Treatment code:1,Age,Diagnosis code\n\
                   c1,A,2005-01-01,T1,,50,M13\n\
                   c1,B,2005-02-01,T1,T2,51,\n\
                   c1,C,2005-01-15,T9,,,\n";
        let log = parse_log_reader(csv.as_bytes(), &Schema::default()).unwrap();
        let case = &log.cases[0];
        assert_eq!(case.treatment_code, "T2");
        assert_eq!(case.age, 51);
        assert_eq!(case.diagnosis_code.as_deref(), Some("M13"));
        assert_eq!(log.spread_features, vec!["Treatment code".to_string()]);
        let (_, report) = clean_log(&log, 1).unwrap();
        assert_eq!(report.collapsed_features, vec!["Treatment code".to_string()]);
    }

    fn labeled(id: &str, label: &str, acts: &[&str]) -> Case {
        let events = acts.iter().enumerate().map(|(i, a)| ev(a, i as i64 * 86_400)).collect();
        Case::new(id, events).with_label(label)
    }

    #[test]
    fn no_missing_labels_means_nothing_imputed() {
        let log = EventLog::from_cases(vec![
            labeled("a", "X", &["p", "q"]),
            labeled("b", "Y", &["r"]),
        ])
        .unwrap();
        let (clean, report) = clean_log(&log, 1).unwrap();
        assert_eq!(report.imputed_labels, 0);
        assert_eq!(clean, log);
    }

    #[test]
    fn unlabeled_case_inherits_unique_nearest_label() {
        let unl = Case::new("u", vec![ev("p", 0), ev("q", 10)]);
        let log = EventLog::from_cases(vec![
            labeled("a", "X", &["p", "q"]),
            labeled("b", "Y", &["r", "s"]),
            unl,
        ])
        .unwrap();
        let (clean, report) = clean_log(&log, 1).unwrap();
        assert_eq!(report.imputed_labels, 1);
        let u = clean.cases.iter().find(|c| c.case_id == "u").unwrap();
        assert_eq!(u.diagnosis_code.as_deref(), Some("X"));
    }

    #[test]
    fn imputation_ties_prefer_larger_class_then_lexicographic() {
        let unl = Case::new("u", vec![ev("p", 0)]);
        let log = EventLog::from_cases(vec![
            labeled("a", "Z", &["p", "x"]),
            labeled("b", "Y", &["p", "y"]),
            labeled("c", "Y", &["w"]),
            unl.clone(),
        ])
        .unwrap();
        let (clean, _) = clean_log(&log, 1).unwrap();
        assert_eq!(clean.cases.last().unwrap().diagnosis_code.as_deref(), Some("Y"));

        let log = EventLog::from_cases(vec![
            labeled("a", "Z", &["p", "x"]),
            labeled("b", "Y", &["p", "y"]),
            unl,
        ])
        .unwrap();
        let (clean, _) = clean_log(&log, 1).unwrap();
        assert_eq!(clean.cases.last().unwrap().diagnosis_code.as_deref(), Some("Y"));
    }

    #[test]
    fn dissimilar_unlabeled_case_is_dropped() {
        let log = EventLog::from_cases(vec![
            labeled("a", "X", &["p"]),
            Case::new("u", vec![ev("zzz", 0)]),
        ])
        .unwrap();
        let (clean, report) = clean_log(&log, 1).unwrap();
        assert_eq!(report.dropped_cases, 1);
        assert_eq!(clean.len(), 1);
    }

    #[test]
    fn all_unlabeled_cannot_impute() {
        let log = EventLog::from_cases(vec![Case::new("u", vec![ev("p", 0)])]).unwrap();
        assert!(matches!(clean_log(&log, 1), Err(Error::CannotImpute(_))));
        assert!(clean_log(&log, 0).is_err());
    }

    #[test]
    fn single_timestamp_case_has_zero_years() {
        let c = Case::new("a", vec![ev("p", 5), ev("q", 5)]);
        assert_eq!(c.years_in_treatment, 0.0);
    }

    #[test]
    fn correlation_examples() {
        let m = pearson_matrix(
            vec!["x".into(), "y".into(), "z".into(), "k".into()],
            &[
                vec![1.0, 2.0, 3.0, 4.0],
                vec![2.0, 4.0, 6.0, 8.0],
                vec![4.0, 3.0, 2.0, 1.0],
                vec![7.0, 7.0, 7.0, 7.0],
            ],
        );
        assert_eq!(m.values[0][0], 1.0);
        assert!((m.values[0][1] - 1.0).abs() < 1e-12);
        assert!((m.values[0][2] + 1.0).abs() < 1e-12);
        assert_eq!(m.values[0][3], 0.0);
        assert_eq!(m.values[3][3], 1.0);
        assert_eq!(m.zero_variance, vec!["k".to_string()]);
    }

    #[test]
    fn correlation_over_log_is_symmetric_with_unit_diagonal() {
        let mut a = labeled("a", "X", &["p", "q", "p"]);
        a.age = 40;
        let mut b = labeled("b", "Y", &["r", "p"]);
        b.age = 70;
        let log = EventLog::from_cases(vec![a, b]).unwrap();
        let m = correlation_matrix(&log, &Attribute::ALL).unwrap();
        for i in 0..m.features.len() {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..m.features.len() {
                assert!((m.values[i][j] - m.values[j][i]).abs() < 1e-12);
                assert!(m.values[i][j].abs() <= 1.0);
            }
        }
        assert!(m.zero_variance.contains(&"department".to_string()));
    }
}
