use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{existing, parse_forest_grid, parse_net_grid, read_json, ModelFamily, Outputs, RunConfig};
use crate::container::Container;
use crate::encode::{stratified_kfold, stratified_split, Encoder, FlatDataset, SequenceDataset, Split};
use crate::error::{Error, Result};
use crate::eventlog::{clean_log, parse_log, write_csv_to, CleaningReport, EventLog, Schema};
use crate::explain::lime::{lime_explain, Background, Explanation, LimeConfig};
use crate::explain::{ale, ice, pdp, quantile_grid, submodular_pick, CurveSet, GlobalSummary};
use crate::explain::{fit_global_surrogate, SurrogateKind};
use crate::forest::{fit_forest, ForestModel, ForestParams};
use crate::latent::autoencoder::{fit_autoencoder, AeConfig};
use crate::latent::{analyze_misclassifications, capture_activations, grid_search_ae, project, LatentProjection};
use crate::seqnet::{grid_search, GridRow, GridSpace};
use crate::seqnet::{Architecture, EvalReport, SeqNetModel, DEFAULT_BATCH};
use crate::svg;
use crate::synth::{generate_synthetic, SyntheticSpec};

pub const DEFAULT_FOREST_GRID: &str = "1000x100,1500x200";

/// What a command wrote, plus a short JSON summary for the console.
#[derive(Debug, Clone, Serialize)]
pub struct CommandReport {
    pub command: String,
    pub written: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn finish(command: &str, out: Outputs, summary: serde_json::Value) -> Result<CommandReport> {
    Ok(CommandReport {
        command: command.into(),
        written: out.commit()?,
        summary,
    })
}

/// Case id turned into a file-name fragment.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------- synth

/// Resolves `paths.spec`: a JSON/TOML file, or one of the preset names
/// `disjoint`, `planted`, `order`. Defaults to `planted`.
pub fn load_spec(cfg: &RunConfig) -> Result<SyntheticSpec> {
    let Some(path) = &cfg.paths.spec else {
        return Ok(SyntheticSpec::planted());
    };
    if !path.exists() {
        return match path.to_string_lossy().as_ref() {
            "disjoint" => Ok(SyntheticSpec::disjoint_motifs()),
            "planted" => Ok(SyntheticSpec::planted()),
            "order" => Ok(SyntheticSpec::order_only()),
            _ => Err(Error::Config(format!("synthetic spec `{}` does not exist", path.display()))),
        };
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let spec = load_spec(cfg)?;
    let (log, manifest) = generate_synthetic(&spec, cfg.seed)?;
    let dir = cfg.dir("synth");
    let mut out = Outputs::new(cfg.provenance());
    let mut csv = Vec::new();
    write_csv_to(&log, &mut csv)?;
    out.csv(dir.join("log.csv"), &csv);
    out.json(dir.join("manifest.json"), &manifest)?;
    finish(
        "synth",
        out,
        serde_json::json!({ "cases": log.len(), "classes": log.class_counts }),
    )
}

// ---------------------------------------------------------------- ingest

/// Cleaned log with its encoder and split, as written by [`cmd_ingest`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub log: EventLog,
    pub encoder: Encoder,
    pub split: Split,
    pub flat: FlatDataset,
    pub sequences: SequenceDataset,
}

impl Prepared {
    /// Cleans, splits and encodes a parsed log.
    pub fn build(cfg: &RunConfig, raw: &EventLog) -> Result<(Prepared, CleaningReport)> {
        let (log, report) = clean_log(raw, cfg.min_class)?;
        let labels = log.labels();
        let y: Vec<usize> = log
            .cases
            .iter()
            .map(|c| {
                let l = c.diagnosis_code.as_ref().expect("cleaned cases are labeled");
                labels.binary_search(l).expect("label listed")
            })
            .collect();
        let split = stratified_split(&y, cfg.split, cfg.seed)?;
        let encoder = Encoder::fit(&log, cfg.features.clone(), cfg.window, Some(&split.train))?;
        let prepared = Prepared::encode(log, encoder, split)?;
        Ok((prepared, report))
    }

    fn encode(log: EventLog, encoder: Encoder, split: Split) -> Result<Prepared> {
        let flat = encoder.flat(&log)?;
        let sequences = encoder.sequences(&log)?;
        Ok(Prepared {
            log,
            encoder,
            split,
            flat,
            sequences,
        })
    }

    pub fn load(cfg: &RunConfig) -> Result<Prepared> {
        let dir = cfg.dir("data");
        for f in ["log.json", "encoder.json", "split.json"] {
            existing(&dir.join(f), "ingested dataset file (run `xlog ingest` first)")?;
        }
        let log: EventLog = read_json(&dir.join("log.json"))?;
        let encoder: Encoder = read_json(&dir.join("encoder.json"))?;
        let split: Split = read_json(&dir.join("split.json"))?;
        Prepared::encode(log, encoder, split)
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.flat
            .label_names
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class `{label}`")))
    }

    pub fn row_of(&self, case_id: &str) -> Result<usize> {
        self.flat
            .case_ids
            .iter()
            .position(|c| c == case_id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case id `{case_id}`")))
    }
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let csv = cfg
        .paths
        .csv
        .as_deref()
        .ok_or_else(|| Error::Config("ingest needs a CSV path".into()))?;
    existing(csv, "CSV")?;
    let schema = match &cfg.paths.schema {
        Some(p) => {
            existing(p, "schema")?;
            Schema::load(p)?
        }
        None => Schema::default(),
    };
    let raw = parse_log(csv, &schema)?;
    let (prep, report) = Prepared::build(cfg, &raw)?;
    let dir = cfg.dir("data");
    let mut out = Outputs::new(cfg.provenance());
    out.json(dir.join("log.json"), &prep.log)?;
    out.json(dir.join("encoder.json"), &prep.encoder)?;
    out.json(dir.join("split.json"), &prep.split)?;
    out.json(dir.join("cleaning_report.json"), &report)?;
    out.raw(dir.join("flat.xlg"), prep.flat.to_container().to_bytes());
    out.raw(dir.join("sequences.xlg"), prep.sequences.to_container().to_bytes());
    finish(
        "ingest",
        out,
        serde_json::json!({
            "cases": prep.log.len(),
            "kept_classes": report.kept_classes,
            "dropped_classes": report.dropped_classes,
            "imputed_labels": report.imputed_labels,
            "train": prep.split.train.len(),
            "test": prep.split.test.len(),
            "flat_columns": prep.flat.columns.len(),
        }),
    )
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGridRow {
    pub n_estimators: usize,
    pub max_features: usize,
    /// `max_features` clamped to the column count.
    pub max_features_used: usize,
    /// Mean fold accuracy on the training split; `None` without folds.
    pub cv_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub family: ModelFamily,
    pub forest_grid: Vec<ForestGridRow>,
    pub network_grid: Vec<GridRow>,
    /// Test-split evaluation of the selected model.
    pub evaluation: EvalReport,
    pub label_names: Vec<String>,
    /// Top gini importances of the selected forest.
    pub importance: Vec<(String, f64)>,
}

fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len().max(1) as f64
}

/// Grid search over forests. Rows follow the grid order; the selected row
/// has the best CV accuracy (test accuracy without folds), ties to the
/// earlier cell.
pub fn train_forest_grid(
    cfg: &RunConfig,
    data: &FlatDataset,
    split: &Split,
) -> Result<(Vec<ForestGridRow>, ForestModel)> {
    let cells = parse_forest_grid(cfg.grid.as_deref().unwrap_or(DEFAULT_FOREST_GRID))?;
    let p = data.columns.len();
    let k = data.label_names.len();
    let train = data.subset(&split.train);
    let test = data.subset(&split.test);
    let folds = if cfg.folds >= 2 {
        stratified_kfold(&train.y, cfg.folds, cfg.seed)?
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for (n, mf) in cells {
        let params = ForestParams::new(n, mf.min(p), cfg.seed);
        let cv_accuracy = if folds.is_empty() {
            None
        } else {
            let mut total = 0.0;
            for fold in &folds {
                let a = train.subset(&fold.train);
                let b = train.subset(&fold.test);
                let m = fit_forest(a.x.view(), &a.y, k, a.feature_names(), params.clone())?;
                total += accuracy(&m.predict(b.x.view())?, &b.y);
            }
            Some(total / folds.len() as f64)
        };
        let model = fit_forest(train.x.view(), &train.y, k, train.feature_names(), params)?;
        rows.push(ForestGridRow {
            n_estimators: n,
            max_features: mf,
            max_features_used: mf.min(p),
            cv_accuracy,
            test_accuracy: accuracy(&model.predict(test.x.view())?, &test.y),
            best: false,
        });
        models.push(model);
    }
    let score = |r: &ForestGridRow| r.cv_accuracy.unwrap_or(r.test_accuracy);
    let best = (0..rows.len())
        .rev()
        .max_by(|&a, &b| score(&rows[a]).total_cmp(&score(&rows[b])))
        .expect("non-empty grid");
    rows[best].best = true;
    Ok((rows, models.swap_remove(best)))
}

fn default_cell(arch: Architecture) -> (Architecture, usize, usize) {
    match arch {
        Architecture::Dense => (arch, 25, 30),
        Architecture::Lstm => (arch, 20, 200),
        Architecture::BiLstm => (arch, 20, 150),
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let prep = Prepared::load(cfg)?;
    let dir = cfg.dir("model");
    let mut out = Outputs::new(cfg.provenance());
    let report = match cfg.model.architecture() {
        None => {
            let (rows, model) = train_forest_grid(cfg, &prep.flat, &prep.split)?;
            let test = prep.flat.subset(&prep.split.test);
            let probs = model.predict_proba(test.x.view())?;
            let evaluation = EvalReport::from_probs(probs.view(), &test.y, model.n_classes);
            let importance = model.gini_importance().top(20);
            out.json(dir.join("forest.json"), &model)?;
            out.svg(dir.join("importance.svg"), &svg::bars("Gini importance", &importance));
            TrainReport {
                family: cfg.model,
                forest_grid: rows,
                network_grid: Vec::new(),
                evaluation,
                label_names: prep.flat.label_names.clone(),
                importance,
            }
        }
        Some(arch) => {
            let configs = match &cfg.grid {
                Some(g) => parse_net_grid(g)?,
                None => vec![default_cell(arch)],
            };
            let space = GridSpace {
                configs,
                learning_rate: cfg.learning_rate,
                batch_size: DEFAULT_BATCH,
            };
            let (rows, mut models) = grid_search(&space, &prep.sequences, &prep.split, cfg.seed)?;
            let model = models.swap_remove(0);
            out.json(dir.join("seqnet.json"), &model.manifest())?;
            out.raw(dir.join("seqnet.xlg"), model.to_container().to_bytes());
            let curve: Vec<f64> = model.curve.iter().map(|e| e.train_loss).collect();
            let x: Vec<f64> = (1..=curve.len()).map(|e| e as f64).collect();
            let axes = svg::Axes {
                x_label: "epoch",
                y_label: "training loss",
            };
            out.svg(dir.join("loss.svg"), &svg::lines("Training loss", &axes, &x, &[curve], 1));
            TrainReport {
                family: cfg.model,
                forest_grid: Vec::new(),
                evaluation: rows[0].report.clone(),
                network_grid: rows,
                label_names: prep.sequences.label_names.clone(),
                importance: Vec::new(),
            }
        }
    };
    let name = if cfg.model == ModelFamily::Forest { "forest_report.json" } else { "seqnet_report.json" };
    out.json(dir.join(name), &report)?;
    let summary = serde_json::json!({
        "family": report.family,
        "test_accuracy": report.evaluation.accuracy,
        "grid_rows": report.forest_grid.len() + report.network_grid.len(),
    });
    finish("train", out, summary)
}

pub fn load_forest(cfg: &RunConfig) -> Result<ForestModel> {
    let path = cfg.dir("model").join("forest.json");
    existing(&path, "forest checkpoint (run `xlog train --model forest` first)")?;
    read_json(&path)
}

pub fn load_seqnet(cfg: &RunConfig) -> Result<SeqNetModel> {
    let dir = cfg.dir("model");
    let manifest_path = dir.join("seqnet.json");
    existing(&manifest_path, "network checkpoint (run `xlog train --model lstm` first)")?;
    let manifest: serde_json::Value = read_json(&manifest_path)?;
    let weights = Container::load(&dir.join("seqnet.xlg"))?;
    SeqNetModel::from_checkpoint(&manifest, &weights)
}

// ---------------------------------------------------------------- explain

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainMethod {
    Lime,
    Pick,
    Surrogate,
    Pdp,
    Ice,
    Ale,
}

impl ExplainMethod {
    pub fn name(self) -> &'static str {
        match self {
            ExplainMethod::Lime => "lime",
            ExplainMethod::Pick => "pick",
            ExplainMethod::Surrogate => "surrogate",
            ExplainMethod::Pdp => "pdp",
            ExplainMethod::Ice => "ice",
            ExplainMethod::Ale => "ale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub method: ExplainMethod,
    /// Case ids for `lime`.
    pub instances: Vec<String>,
    /// Class label: required for `pick`; target class of curves; LIME
    /// explains the predicted class when unset.
    pub class: Option<String>,
    /// Column name for `pdp`, `ice` and `ale`.
    pub feature: Option<String>,
    /// `tree` (default) or `linear` for `surrogate`.
    pub surrogate: Option<String>,
}

impl ExplainRequest {
    pub fn new(method: ExplainMethod) -> Self {
        ExplainRequest {
            method,
            instances: Vec::new(),
            class: None,
            feature: None,
            surrogate: None,
        }
    }
}

/// Written by `explain --method pick`: the summary and every explanation it
/// chose from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickOutput {
    pub summary: GlobalSummary,
    pub candidates: Vec<Explanation>,
}

fn lime_config(cfg: &RunConfig, seed: u64) -> LimeConfig {
    let mut c = LimeConfig::new(cfg.explain.k, cfg.explain.n_samples, seed);
    c.sigma = cfg.explain.sigma;
    c.selection = cfg.explain.selection;
    c
}

fn explanation_bars(e: &Explanation, label: &str) -> String {
    let items: Vec<(String, f64)> = e.weights.iter().map(|w| (w.feature.clone(), w.weight)).collect();
    svg::signed_bars(&format!("{} (class {label})", e.instance), &items)
}

/// LIME explanations of `rows`, seeded by row so results do not depend on
/// which other rows are requested.
pub fn explain_rows(
    cfg: &RunConfig,
    model: &ForestModel,
    prep: &Prepared,
    rows: &[usize],
    class: Option<usize>,
) -> Result<Vec<Explanation>> {
    let train = prep.flat.subset(&prep.split.train);
    let names = train.feature_names();
    let categorical: Vec<bool> = train.columns.iter().map(|c| c.categorical).collect();
    let bg = Background::new(train.x.view(), &names, &categorical)?;
    rows.iter()
        .map(|&r| {
            let instance = prep.flat.x.row(r).to_vec();
            let c = match class {
                Some(c) => c,
                None => model.predict(prep.flat.x.slice(ndarray::s![r..=r, ..]))?[0],
            };
            let seed = cfg.seed.wrapping_add(r as u64);
            lime_explain(model, &instance, &prep.flat.case_ids[r], &bg, c, &lime_config(cfg, seed))
        })
        .collect()
}

fn curves_csv(set: &CurveSet, ids: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![set.feature.clone()];
    if set.values.len() == 1 {
        header.push("value".into());
    } else {
        header.extend(ids.iter().cloned());
    }
    w.write_record(&header)?;
    for (j, g) in set.grid.iter().enumerate() {
        let mut rec = vec![g.to_string()];
        rec.extend(set.values.iter().map(|c| c[j].to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn cmd_explain(cfg: &RunConfig, req: &ExplainRequest) -> Result<CommandReport> {
    cfg.validate()?;
    let prep = Prepared::load(cfg)?;
    let model = load_forest(cfg)?;
    let dir = cfg.dir("explain");
    let mut out = Outputs::new(cfg.provenance());
    let class = req.class.as_deref().map(|l| prep.label_index(l)).transpose()?;
    let labels = &prep.flat.label_names;
    let summary = match req.method {
        ExplainMethod::Lime => {
            if req.instances.is_empty() {
                return Err(Error::InvalidArgument("lime needs at least one instance id".into()));
            }
            let rows: Vec<usize> = req.instances.iter().map(|id| prep.row_of(id)).collect::<Result<_>>()?;
            let expl = explain_rows(cfg, &model, &prep, &rows, class)?;
            for e in &expl {
                let stem = format!("lime_{}", slug(&e.instance));
                out.json(dir.join(format!("{stem}.json")), e)?;
                out.svg(dir.join(format!("{stem}.svg")), &explanation_bars(e, &labels[e.class]));
            }
            serde_json::json!({ "explanations": expl.len() })
        }
        ExplainMethod::Pick => {
            let c = class.ok_or_else(|| Error::InvalidArgument("pick needs --class".into()))?;
            let of_class = |rows: &[usize]| -> Vec<usize> {
                rows.iter().copied().filter(|&r| prep.flat.y[r] == c).collect()
            };
            let mut rows = of_class(&prep.split.test);
            if rows.is_empty() {
                rows = of_class(&(0..prep.flat.len()).collect::<Vec<_>>());
            }
            rows.truncate(cfg.explain.candidates.max(1));
            let expl = explain_rows(cfg, &model, &prep, &rows, Some(c))?;
            let summary = submodular_pick(&expl, cfg.explain.budget)?;
            let stem = format!("pick_{}", slug(&labels[c]));
            let mut imp: Vec<(String, f64)> = summary.importance.iter().map(|(k, v)| (k.clone(), *v)).collect();
            imp.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            imp.truncate(15);
            out.json(
                dir.join(format!("{stem}.json")),
                &PickOutput {
                    summary: summary.clone(),
                    candidates: expl.clone(),
                },
            )?;
            out.svg(
                dir.join(format!("{stem}.svg")),
                &svg::bars(&format!("Global importance, class {}", labels[c]), &imp),
            );
            for e in &summary.explanations {
                out.svg(
                    dir.join(format!("{stem}_{}.svg", slug(&e.instance))),
                    &explanation_bars(e, &labels[c]),
                );
            }
            serde_json::json!({ "candidates": expl.len(), "picked": summary.picked, "coverage": summary.coverage })
        }
        ExplainMethod::Surrogate => {
            let kind = match req.surrogate.as_deref().unwrap_or("tree") {
                "tree" => SurrogateKind::Tree {
                    max_depth: cfg.explain.surrogate_depth,
                },
                "linear" => SurrogateKind::Linear {
                    lambda: cfg.explain.surrogate_lambda,
                },
                other => return Err(Error::InvalidArgument(format!("unknown surrogate `{other}`"))),
            };
            let report = fit_global_surrogate(&model, prep.flat.x.view(), kind)?;
            let name = if matches!(kind, SurrogateKind::Tree { .. }) { "tree" } else { "linear" };
            out.json(dir.join(format!("surrogate_{name}.json")), &report)?;
            serde_json::json!({ "agreement": report.agreement, "r2_per_class": report.r2_per_class })
        }
        method @ (ExplainMethod::Pdp | ExplainMethod::Ice | ExplainMethod::Ale) => {
            let feature = req
                .feature
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument(format!("{} needs --feature", method.name())))?;
            let f = prep
                .flat
                .columns
                .iter()
                .position(|c| c.name == feature)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{feature}`")))?;
            let c = class.unwrap_or(0);
            let train = prep.flat.subset(&prep.split.train);
            let x = train.x.view();
            let grid = quantile_grid(x, f, cfg.explain.grid_points);
            let set = match method {
                ExplainMethod::Pdp => pdp(&model, x, f, &grid, c)?,
                ExplainMethod::Ice => ice(&model, x, f, &grid, c)?,
                _ => ale(&model, x, f, cfg.explain.ale_intervals, c)?,
            }
            .named(feature);
            let stem = format!("{}_{}", method.name(), slug(feature));
            out.json(dir.join(format!("{stem}.json")), &set)?;
            out.csv(dir.join(format!("{stem}.csv")), &curves_csv(&set, &train.case_ids)?);
            let axes = svg::Axes {
                x_label: feature,
                y_label: "P(class)",
            };
            let mut series = set.values.clone();
            let highlight = if method == ExplainMethod::Ice {
                series.push(crate::explain::curves::mean_curve(&set.values));
                series.len() - 1
            } else {
                0
            };
            let title = format!("{} of {feature}, class {}", method.name().to_uppercase(), labels[c]);
            out.svg(dir.join(format!("{stem}.svg")), &svg::lines(&title, &axes, &set.grid, &series, highlight));
            serde_json::json!({ "grid_points": set.grid.len(), "curves": set.values.len(), "notes": set.notes })
        }
    };
    finish("explain", out, summary)
}

// ---------------------------------------------------------------- project

pub(crate) fn projection_csv(proj: &LatentProjection, split: Option<&Split>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let test: std::collections::BTreeSet<usize> = split.map(|s| s.test.iter().copied().collect()).unwrap_or_default();
    w.write_record(["id", "x", "y", "true", "predicted", "cluster", "split"])?;
    for i in 0..proj.ids.len() {
        let cluster = proj.clusters.get(i).map_or(String::new(), ToString::to_string);
        w.write_record([
            proj.ids[i].clone(),
            proj.coords[[i, 0]].to_string(),
            proj.coords[[i, 1]].to_string(),
            proj.label_names[proj.true_labels[i]].clone(),
            proj.label_names[proj.predicted[i]].clone(),
            cluster,
            if test.contains(&i) { "test" } else { "train" }.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub(crate) fn projection_svg(proj: &LatentProjection, title: &str) -> String {
    let points: Vec<(f64, f64)> = proj.coords.rows().into_iter().map(|r| (r[0], r[1])).collect();
    let axes = svg::Axes {
        x_label: "z1",
        y_label: "z2",
    };
    svg::scatter(title, &axes, &points, &proj.true_labels, &proj.predicted, &proj.label_names)
}

pub fn cmd_project(cfg: &RunConfig, grid_mode: bool) -> Result<CommandReport> {
    cfg.validate()?;
    let prep = Prepared::load(cfg)?;
    let model = load_seqnet(cfg)?;
    let lc = &cfg.latent;
    let acts = capture_activations(&model, &prep.sequences, lc.layer)?;
    let train_acts = acts.subset(&prep.split.train);
    let k = lc.k.unwrap_or(prep.sequences.label_names.len());
    let dir = cfg.dir("latent");
    let mut out = Outputs::new(cfg.provenance());
    let arch = model.config.architecture;
    let capture = if arch == Architecture::BiLstm && lc.layer == 0 {
        format!("{}-wide capture: forward and backward final states concatenated", acts.width())
    } else {
        format!("{}-wide capture", acts.width())
    };
    let summary = if grid_mode {
        let (rows, projections) = grid_search_ae(&train_acts, &lc.candidates, lc.epochs, lc.learning_rate, k, cfg.seed)?;
        for (hidden, proj) in &projections {
            out.csv(dir.join(format!("projection_h{hidden}.csv")), &projection_csv(proj, None)?);
        }
        let report = serde_json::json!({
            "architecture": arch, "layer": lc.layer, "capture": capture, "k": k, "ranking": rows,
        });
        out.json(dir.join("grid_report.json"), &report)?;
        serde_json::json!({ "best_hidden": rows[0].hidden, "candidates": rows.len() })
    } else {
        let ae = fit_autoencoder(
            train_acts.values.view(),
            AeConfig::new(lc.hidden, lc.epochs, lc.learning_rate, cfg.seed),
        )?;
        let proj = project(&ae, &acts)?;
        let clusters = analyze_misclassifications(&proj, k, cfg.seed)?;
        let proj = proj.with_clusters(&clusters);
        out.csv(dir.join("projection.csv"), &projection_csv(&proj, Some(&prep.split))?);
        out.svg(
            dir.join("projection.svg"),
            &projection_svg(&proj, &format!("{} layer {} projection", arch.name(), lc.layer)),
        );
        let report = serde_json::json!({
            "architecture": arch,
            "layer": lc.layer,
            "capture": capture,
            "autoencoder": { "hidden": lc.hidden, "epochs": lc.epochs, "final_mse": ae.final_mse, "flag": ae.flag },
            "clusters": clusters,
        });
        out.json(dir.join("latent_report.json"), &report)?;
        serde_json::json!({
            "purity": clusters.purity,
            "silhouette": clusters.silhouette,
            "misclassified": clusters.misclassified().count(),
        })
    };
    finish("project", out, summary)
}

/// Convenience for examples and tests: a config rooted at `workdir`.
pub fn config_in(workdir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.paths.workdir = workdir.to_path_buf();
    cfg
}
