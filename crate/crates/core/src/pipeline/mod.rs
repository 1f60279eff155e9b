//! Run configuration, output staging and the commands behind the `xlog` binary.
//!
//! A run reads and writes a single work directory:
//!
//! ```text
//! <workdir>/synth/    log.csv, manifest.json
//! <workdir>/data/     log.json, encoder.json, split.json, cleaning_report.json,
//!                     flat.xlg, sequences.xlg
//! <workdir>/model/    forest.json, forest_report.json, importance.svg |
//!                     seqnet.json, seqnet.xlg, seqnet_report.json, loss.svg
//! <workdir>/explain/  lime_*, pick_*, surrogate_*, pdp_*, ice_*, ale_*
//! <workdir>/latent/   projection.csv, projection.svg, latent_report.json
//! ```
//!
//! Every JSON file is `{"provenance": {...}, "data": ...}`; CSV and SVG files
//! carry the same stamp in a leading comment.

mod commands;

pub use commands::*;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encode::{FeatureSpec, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::eventlog::DEFAULT_MIN_CLASS_COUNT;
use crate::explain::lime::Selection;
use crate::seqnet::{Architecture, DEFAULT_LEARNING_RATE};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Forest,
    Dense,
    Lstm,
    Bilstm,
}

impl ModelFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forest" | "rf" => Some(ModelFamily::Forest),
            "dense" => Some(ModelFamily::Dense),
            "lstm" => Some(ModelFamily::Lstm),
            "bilstm" => Some(ModelFamily::Bilstm),
            _ => None,
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            ModelFamily::Forest => None,
            ModelFamily::Dense => Some(Architecture::Dense),
            ModelFamily::Lstm => Some(Architecture::Lstm),
            ModelFamily::Bilstm => Some(Architecture::BiLstm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Features kept per LIME explanation.
    pub k: usize,
    pub n_samples: usize,
    /// Kernel width; `0.75 * sqrt(p)` when unset.
    pub sigma: Option<f64>,
    /// Submodular pick budget.
    pub budget: usize,
    pub selection: Selection,
    /// Instances of the class explained before picking.
    pub candidates: usize,
    pub grid_points: usize,
    pub ale_intervals: usize,
    pub surrogate_depth: usize,
    pub surrogate_lambda: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            k: 5,
            n_samples: 5000,
            sigma: None,
            budget: 5,
            selection: Selection::Forward,
            candidates: 20,
            grid_points: 20,
            ale_intervals: 10,
            surrogate_depth: 4,
            surrogate_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatentConfig {
    pub layer: usize,
    pub hidden: usize,
    pub bottleneck: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Cluster count; the class count when unset.
    pub k: Option<usize>,
    /// Hidden widths tried in grid mode.
    pub candidates: Vec<usize>,
}

impl Default for LatentConfig {
    fn default() -> Self {
        LatentConfig {
            layer: 0,
            hidden: 8,
            bottleneck: crate::latent::autoencoder::BOTTLENECK,
            epochs: 2000,
            learning_rate: 0.05,
            k: None,
            candidates: crate::latent::DEFAULT_AE_CANDIDATES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Where outputs go; not hashed, so identical runs into different
    /// directories carry the same stamp.
    #[serde(skip_serializing)]
    pub workdir: PathBuf,
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Synthetic spec (JSON or TOML); a preset name is also accepted.
    pub spec: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            workdir: PathBuf::from("xlog-out"),
            csv: None,
            schema: None,
            spec: None,
        }
    }
}

/// Everything that determines a run's outputs. Loaded from TOML; command
/// line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Sequence window T (and flattened window L).
    pub window: usize,
    /// Test fraction of the stratified split.
    pub split: f64,
    pub min_class: usize,
    pub model: ModelFamily,
    /// Forest: `trees x max_features, ...`; networks: `arch:nodes:epochs, ...`.
    pub grid: Option<String>,
    /// Cross-validation folds for the forest grid; below 2 ranks on the test split.
    pub folds: usize,
    pub learning_rate: f64,
    pub features: FeatureSpec,
    pub explain: ExplainConfig,
    pub latent: LatentConfig,
    pub paths: PathsConfig,
    /// Worker threads; does not affect results and is not hashed.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            window: DEFAULT_WINDOW,
            split: 0.2,
            min_class: DEFAULT_MIN_CLASS_COUNT,
            model: ModelFamily::Forest,
            grid: None,
            folds: 5,
            learning_rate: DEFAULT_LEARNING_RATE,
            features: FeatureSpec::default(),
            explain: ExplainConfig::default(),
            latent: LatentConfig::default(),
            paths: PathsConfig::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form. Input
    /// files enter by content digest, so the hash does not depend on where
    /// they live.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let inputs = [
            ("csv", &self.paths.csv),
            ("schema", &self.paths.schema),
            ("spec", &self.paths.spec),
        ];
        for (key, path) in inputs {
            if let Some(bytes) = path.as_deref().and_then(|p| std::fs::read(p).ok()) {
                value["paths"][key] = hex::encode(Sha256::digest(&bytes)).into();
            }
        }
        let canonical = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))[..16].to_string()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            tool: "xlog".into(),
            version: VERSION.into(),
            config_hash: self.hash(),
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window == 0 {
            return bad("window must be >= 1".into());
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("split {} outside (0, 1)", self.split));
        }
        if self.explain.k == 0 || self.explain.n_samples < 2 {
            return bad("explain.k must be >= 1 and explain.n_samples >= 2".into());
        }
        if self.explain.sigma.is_some_and(|s| s <= 0.0) {
            return bad("explain.sigma must be positive".into());
        }
        if self.latent.bottleneck != crate::latent::autoencoder::BOTTLENECK {
            return bad(format!(
                "latent.bottleneck {} unsupported; projections are {}-D",
                self.latent.bottleneck,
                crate::latent::autoencoder::BOTTLENECK
            ));
        }
        if let Some(g) = &self.grid {
            match self.model {
                ModelFamily::Forest => {
                    parse_forest_grid(g)?;
                }
                _ => {
                    parse_net_grid(g)?;
                }
            }
        }
        Ok(())
    }

    pub fn dir(&self, sub: &str) -> PathBuf {
        self.paths.workdir.join(sub)
    }
}

/// Requires `path` to exist.
pub(crate) fn existing(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} `{}` does not exist", path.display())))
    }
}

/// `"1000x100,1500x200"` into `(n_estimators, max_features)` pairs.
pub fn parse_forest_grid(spec: &str) -> Result<Vec<(usize, usize)>> {
    let cells: Result<Vec<(usize, usize)>> = spec
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let (n, f) = cell
                .split_once(['x', 'X'])
                .ok_or_else(|| Error::Config(format!("forest grid cell `{cell}` is not TREESxFEATURES")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| Error::Config(format!("bad number in forest grid cell `{cell}`")))
            };
            Ok((parse(n)?, parse(f)?))
        })
        .collect();
    let cells = cells?;
    if cells.is_empty() {
        return Err(Error::Config("empty forest grid".into()));
    }
    Ok(cells)
}

/// `"lstm:20:200,dense:25:30"` into `(architecture, nodes, epochs)` triples.
pub fn parse_net_grid(spec: &str) -> Result<Vec<(Architecture, usize, usize)>> {
    let cells: Result<Vec<_>> = spec
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let parts: Vec<&str> = cell.split(':').map(str::trim).collect();
            let err = || Error::Config(format!("network grid cell `{cell}` is not ARCH:NODES:EPOCHS"));
            if parts.len() != 3 {
                return Err(err());
            }
            let arch = Architecture::parse(parts[0]).ok_or_else(err)?;
            let nodes = parts[1].parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(err)?;
            let epochs = parts[2].parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(err)?;
            Ok((arch, nodes, epochs))
        })
        .collect();
    let cells = cells?;
    if cells.is_empty() {
        return Err(Error::Config("empty network grid".into()));
    }
    Ok(cells)
}

/// Stamp embedded in every emitted artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn line(&self) -> String {
        format!(
            "{} {} config {} seed {}",
            self.tool, self.version, self.config_hash, self.seed
        )
    }
}

/// Output files staged in memory and written together. If any write fails,
/// files already written by this batch are removed.
#[derive(Debug)]
pub struct Outputs {
    provenance: Provenance,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(provenance: Provenance) -> Self {
        Outputs {
            provenance,
            files: Vec::new(),
        }
    }

    pub fn json<T: Serialize>(&mut self, path: PathBuf, data: &T) -> Result<()> {
        let doc = serde_json::json!({ "provenance": self.provenance, "data": data });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.files.push((path, bytes));
        Ok(())
    }

    /// `body` must not start with a comment line of its own.
    pub fn csv(&mut self, path: PathBuf, body: &[u8]) {
        let mut bytes = format!("# {}\n", self.provenance.line()).into_bytes();
        bytes.extend_from_slice(body);
        self.files.push((path, bytes));
    }

    /// Inserts the stamp as an XML comment after the opening `<svg ...>` tag.
    pub fn svg(&mut self, path: PathBuf, doc: &str) {
        let comment = format!("<!-- {} -->", self.provenance.line());
        let text = match doc.find('>') {
            Some(i) => format!("{}\n{comment}{}", &doc[..=i], &doc[i + 1..]),
            None => doc.to_string(),
        };
        self.files.push((path, text.into_bytes()));
    }

    /// Binary payloads (`XLG1` containers) are written as-is; the stamp lives
    /// in the JSON written next to them.
    pub fn raw(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.files.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, bytes) in &self.files {
            let res = path
                .parent()
                .map_or(Ok(()), std::fs::create_dir_all)
                .and_then(|()| std::fs::write(path, bytes));
            if let Err(e) = res {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::io(path, e));
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

/// Reads the `data` member of a stamped JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)?;
    let data = doc
        .get_mut("data")
        .map(serde_json::Value::take)
        .ok_or_else(|| Error::Config(format!("{} has no `data` member", path.display())))?;
    Ok(serde_json::from_value(data)?)
}
