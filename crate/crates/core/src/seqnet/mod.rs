//! Sequence classifiers over padded event tensors.
//!
//! The stack is `embedding -> recurrent (LSTM | BiLSTM | none) -> dense
//! (ReLU) -> softmax`. Every categorical feature gets its own embedding
//! table; numeric features pass through unchanged. Without a recurrent layer
//! the embedded timesteps are mean-pooled, which makes the model blind to
//! event order.
//!
//! Only the masked prefix of each row is ever read, so trailing padding has
//! no effect on outputs or gradients.

mod gradcheck;
mod grid;
mod lstm;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use grid::{grid_search, GridRow, GridSpace};
pub use lstm::{lstm_step, CellState, Gate, GradientFault, LstmParams};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{Container, Tensor};
use crate::encode::{FeatureInfo, FeatureKind, SequenceDataset};
use crate::error::{Error, Result};
use crate::forest::argmax;
use lstm::StepCache;

pub const EMBED_DIM: usize = 8;
pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_CLIP: f64 = 5.0;
pub const DEFAULT_LEARNING_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Mean-pooled embeddings, no recurrence.
    Dense,
    Lstm,
    BiLstm,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Dense => "dense",
            Architecture::Lstm => "lstm",
            Architecture::BiLstm => "bilstm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "deep" | "deepnn" => Some(Architecture::Dense),
            "lstm" => Some(Architecture::Lstm),
            "bilstm" => Some(Architecture::BiLstm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub architecture: Architecture,
    /// Width of the recurrent layer and of the dense hidden layer.
    pub nodes: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub embed_dim: usize,
    pub seed: u64,
}

impl NetConfig {
    pub fn new(architecture: Architecture, nodes: usize, epochs: usize) -> Self {
        NetConfig {
            architecture,
            nodes,
            epochs,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH,
            clip_norm: DEFAULT_CLIP,
            embed_dim: EMBED_DIM,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }
}

/// Fully connected layer; `w` is row-major `output x input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub input: usize,
    pub output: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl DenseParams {
    fn zeros(input: usize, output: usize) -> Self {
        DenseParams {
            input,
            output,
            w: vec![0.0; input * output],
            b: vec![0.0; output],
        }
    }

    fn random<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, output);
        let r = 1.0 / (input.max(1) as f64).sqrt();
        p.w.iter_mut().for_each(|v| *v = rng.random_range(-r..r));
        p.b.iter_mut().for_each(|v| *v = rng.random_range(-r..r));
        p
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output)
            .map(|o| {
                let row = &self.w[o * self.input..(o + 1) * self.input];
                self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut DenseParams) -> Vec<f64> {
        let mut dx = vec![0.0; self.input];
        for (o, &d) in dy.iter().enumerate() {
            grad.b[o] += d;
            let base = o * self.input;
            for j in 0..self.input {
                grad.w[base + j] += d * x[j];
                dx[j] += d * self.w[base + j];
            }
        }
        dx
    }
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// One `cardinality x embed_dim` table per categorical feature.
    pub embeddings: Vec<Vec<f64>>,
    pub forward: Option<LstmParams>,
    pub backward: Option<LstmParams>,
    pub hidden: DenseParams,
    pub output: DenseParams,
}

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            embeddings: self.embeddings.iter().map(|e| vec![0.0; e.len()]).collect(),
            forward: self.forward.as_ref().map(|p| LstmParams::zeros(p.input, p.hidden)),
            backward: self.backward.as_ref().map(|p| LstmParams::zeros(p.input, p.hidden)),
            hidden: DenseParams::zeros(self.hidden.input, self.hidden.output),
            output: DenseParams::zeros(self.output.input, self.output.output),
        }
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (k, e) in self.embeddings.iter().enumerate() {
            out.push((format!("embedding.{k}"), e));
        }
        if let Some(p) = &self.forward {
            out.push(("lstm_fwd.w".into(), &p.w));
            out.push(("lstm_fwd.b".into(), &p.b));
        }
        if let Some(p) = &self.backward {
            out.push(("lstm_bwd.w".into(), &p.w));
            out.push(("lstm_bwd.b".into(), &p.b));
        }
        out.push(("hidden.w".into(), &self.hidden.w));
        out.push(("hidden.b".into(), &self.hidden.b));
        out.push(("output.w".into(), &self.output.w));
        out.push(("output.b".into(), &self.output.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out: Vec<(String, &mut Vec<f64>)> = Vec::new();
        for (k, e) in self.embeddings.iter_mut().enumerate() {
            out.push((format!("embedding.{k}"), e));
        }
        if let Some(p) = &mut self.forward {
            out.push(("lstm_fwd.w".into(), &mut p.w));
            out.push(("lstm_fwd.b".into(), &mut p.b));
        }
        if let Some(p) = &mut self.backward {
            out.push(("lstm_bwd.w".into(), &mut p.w));
            out.push(("lstm_bwd.b".into(), &mut p.b));
        }
        out.push(("hidden.w".into(), &mut self.hidden.w));
        out.push(("hidden.b".into(), &mut self.hidden.b));
        out.push(("output.w".into(), &mut self.output.w));
        out.push(("output.b".into(), &mut self.output.b));
        out
    }

    fn add_assign(&mut self, other: &Params) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, s: f64) {
        for (_, a) in self.tensors_mut() {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Per-timestep input assembly: embedded categorical features followed by
/// numeric features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InputLayout {
    /// `(feature column, cardinality)` of each embedded feature.
    categorical: Vec<(usize, usize)>,
    numeric: Vec<usize>,
    embed_dim: usize,
}

impl InputLayout {
    fn new(features: &[FeatureInfo], embed_dim: usize) -> Self {
        let mut categorical = Vec::new();
        let mut numeric = Vec::new();
        for (col, f) in features.iter().enumerate() {
            match f.kind {
                FeatureKind::Categorical { cardinality } => categorical.push((col, cardinality)),
                FeatureKind::Numeric => numeric.push(col),
            }
        }
        InputLayout {
            categorical,
            numeric,
            embed_dim,
        }
    }

    fn dim(&self) -> usize {
        self.categorical.len() * self.embed_dim + self.numeric.len()
    }

    /// Returns the step input and the embedding row used per categorical
    /// feature.
    fn assemble(&self, params: &Params, step: ndarray::ArrayView1<f64>) -> (Vec<f64>, Vec<usize>) {
        let d = self.embed_dim;
        let mut u = Vec::with_capacity(self.dim());
        let mut rows = Vec::with_capacity(self.categorical.len());
        for (k, &(col, card)) in self.categorical.iter().enumerate() {
            let raw = step[col];
            let idx = if raw >= 0.0 && (raw as usize) < card { raw as usize } else { 0 };
            rows.push(idx);
            u.extend_from_slice(&params.embeddings[k][idx * d..(idx + 1) * d]);
        }
        for &col in &self.numeric {
            u.push(step[col]);
        }
        (u, rows)
    }
}

/// Everything the backward pass needs for one sequence.
struct Trace {
    inputs: Vec<Vec<f64>>,
    rows: Vec<Vec<usize>>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
    summary: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of one prediction, floored to avoid `ln 0`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(1e-300).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqNetModel {
    pub config: NetConfig,
    pub features: Vec<FeatureInfo>,
    pub window: usize,
    pub label_names: Vec<String>,
    pub params: Params,
    pub curve: Vec<EpochStats>,
    layout: InputLayout,
}

impl SeqNetModel {
    /// Seeded initialization with `uniform(-r, r)`, `r = 1/sqrt(fan_in)`.
    /// Embedding rows use `fan_in = embed_dim`.
    pub fn new(
        config: NetConfig,
        features: Vec<FeatureInfo>,
        window: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if config.nodes == 0 {
            return Err(Error::InvalidArgument("nodes must be >= 1".into()));
        }
        if label_names.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        let layout = InputLayout::new(&features, config.embed_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = 1.0 / (config.embed_dim.max(1) as f64).sqrt();
        let embeddings = layout
            .categorical
            .iter()
            .map(|&(_, card)| {
                (0..card * config.embed_dim)
                    .map(|_| rng.random_range(-r..r))
                    .collect()
            })
            .collect();
        let d = layout.dim();
        let h = config.nodes;
        let (forward, backward, summary) = match config.architecture {
            Architecture::Dense => (None, None, d),
            Architecture::Lstm => (Some(LstmParams::random(d, h, &mut rng)), None, h),
            Architecture::BiLstm => (
                Some(LstmParams::random(d, h, &mut rng)),
                Some(LstmParams::random(d, h, &mut rng)),
                2 * h,
            ),
        };
        let hidden = DenseParams::random(summary, h, &mut rng);
        let output = DenseParams::random(h, label_names.len(), &mut rng);
        Ok(SeqNetModel {
            config,
            features,
            window,
            label_names,
            params: Params {
                embeddings,
                forward,
                backward,
                hidden,
                output,
            },
            curve: Vec::new(),
            layout,
        })
    }

    /// Builds an untrained model shaped for `data`.
    pub fn for_dataset(config: NetConfig, data: &SequenceDataset) -> Result<Self> {
        Self::new(config, data.features.clone(), data.window, data.label_names.clone())
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Width of the recurrent summary (layer 0).
    pub fn summary_width(&self) -> usize {
        self.params.hidden.input
    }

    fn check(&self, data: &SequenceDataset) -> Result<()> {
        if data.window != self.window {
            return Err(Error::shape(format!("window {}", self.window), format!("window {}", data.window)));
        }
        if data.features.len() != self.features.len() {
            return Err(Error::shape(
                format!("{} features", self.features.len()),
                data.features.len(),
            ));
        }
        Ok(())
    }

    fn trace(&self, x: ArrayView2<f64>, len: usize) -> Trace {
        let params = &self.params;
        let (inputs, rows): (Vec<Vec<f64>>, Vec<Vec<usize>>) =
            (0..len).map(|t| self.layout.assemble(params, x.row(t))).unzip();
        let (fwd, bwd, summary) = match self.config.architecture {
            Architecture::Dense => {
                let mut pooled = vec![0.0; self.layout.dim()];
                for u in &inputs {
                    pooled.iter_mut().zip(u).for_each(|(p, v)| *p += v);
                }
                if len > 0 {
                    pooled.iter_mut().for_each(|p| *p /= len as f64);
                }
                (Vec::new(), Vec::new(), pooled)
            }
            Architecture::Lstm => {
                let p = params.forward.as_ref().expect("lstm params");
                let fwd = p.forward_sequence(&inputs);
                let summary = last_hidden(&fwd, p.hidden);
                (fwd, Vec::new(), summary)
            }
            Architecture::BiLstm => {
                let pf = params.forward.as_ref().expect("forward params");
                let pb = params.backward.as_ref().expect("backward params");
                let fwd = pf.forward_sequence(&inputs);
                let bwd = pb.forward_sequence(inputs.iter().rev());
                let mut summary = last_hidden(&fwd, pf.hidden);
                summary.extend(last_hidden(&bwd, pb.hidden));
                (fwd, bwd, summary)
            }
        };
        let hidden_pre = params.hidden.forward(&summary);
        let hidden: Vec<f64> = hidden_pre.iter().map(|v| v.max(0.0)).collect();
        let probs = softmax(&params.output.forward(&hidden));
        Trace {
            inputs,
            rows,
            fwd,
            bwd,
            summary,
            hidden_pre,
            hidden,
            probs,
        }
    }

    /// Accumulates `d loss / d params` for one sequence given `d loss / d
    /// logits`.
    fn backprop(&self, trace: &Trace, dlogits: &[f64], grad: &mut Params, fault: Option<GradientFault>) {
        let p = &self.params;
        let dhidden = p.output.backward(&trace.hidden, dlogits, &mut grad.output);
        let dpre: Vec<f64> = dhidden
            .iter()
            .zip(&trace.hidden_pre)
            .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
            .collect();
        let dsummary = p.hidden.backward(&trace.summary, &dpre, &mut grad.hidden);
        let len = trace.inputs.len();
        let dinputs: Vec<Vec<f64>> = match self.config.architecture {
            Architecture::Dense => {
                if len == 0 {
                    Vec::new()
                } else {
                    let share: Vec<f64> = dsummary.iter().map(|d| d / len as f64).collect();
                    vec![share; len]
                }
            }
            Architecture::Lstm => {
                let pf = p.forward.as_ref().expect("lstm params");
                if len == 0 {
                    Vec::new()
                } else {
                    pf.backward_sequence(&trace.fwd, &dsummary, grad.forward.as_mut().expect("grad"), fault)
                }
            }
            Architecture::BiLstm => {
                if len == 0 {
                    Vec::new()
                } else {
                    let pf = p.forward.as_ref().expect("forward params");
                    let pb = p.backward.as_ref().expect("backward params");
                    let h = pf.hidden;
                    let mut dx = pf.backward_sequence(
                        &trace.fwd,
                        &dsummary[..h],
                        grad.forward.as_mut().expect("grad"),
                        fault,
                    );
                    let dxb = pb.backward_sequence(
                        &trace.bwd,
                        &dsummary[h..],
                        grad.backward.as_mut().expect("grad"),
                        fault,
                    );
                    // Backward direction processed steps in reverse.
                    for (t, d) in dxb.into_iter().rev().enumerate() {
                        dx[t].iter_mut().zip(d).for_each(|(a, b)| *a += b);
                    }
                    dx
                }
            }
        };
        let dim = self.layout.embed_dim;
        for (t, du) in dinputs.iter().enumerate() {
            for (k, &row) in trace.rows[t].iter().enumerate() {
                let table = &mut grad.embeddings[k][row * dim..(row + 1) * dim];
                table.iter_mut().zip(&du[k * dim..(k + 1) * dim]).for_each(|(g, d)| *g += d);
            }
        }
    }

    /// Class probabilities for every row.
    pub fn forward(&self, data: &SequenceDataset) -> Result<Array2<f64>> {
        self.check(data)?;
        let rows: Vec<Vec<f64>> = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let x = data.x.index_axis(ndarray::Axis(0), i);
                self.trace(x, data.length(i)).probs
            })
            .collect();
        Ok(to_matrix(rows, self.n_classes()))
    }

    pub fn predict(&self, data: &SequenceDataset) -> Result<Vec<usize>> {
        let p = self.forward(data)?;
        Ok(p.rows().into_iter().map(|r| argmax(&r.to_vec())).collect())
    }

    /// Hidden activations of layer 0 (recurrent summary; pooled embeddings
    /// for the dense baseline) or layer 1 (dense ReLU layer).
    pub fn activations(&self, data: &SequenceDataset, layer: usize) -> Result<Array2<f64>> {
        self.check(data)?;
        let width = match layer {
            0 => self.summary_width(),
            1 => self.config.nodes,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "layer {layer} out of range (0 = recurrent, 1 = dense)"
                )))
            }
        };
        let rows: Vec<Vec<f64>> = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let t = self.trace(data.x.index_axis(ndarray::Axis(0), i), data.length(i));
                if layer == 0 {
                    t.summary
                } else {
                    t.hidden
                }
            })
            .collect();
        Ok(to_matrix(rows, width))
    }

    /// Mean cross-entropy over `rows`.
    pub fn loss(&self, data: &SequenceDataset, rows: &[usize]) -> f64 {
        rows.iter()
            .map(|&i| {
                let t = self.trace(data.x.index_axis(ndarray::Axis(0), i), data.length(i));
                cross_entropy(&t.probs, data.y[i])
            })
            .sum::<f64>()
            / rows.len().max(1) as f64
    }

    /// Mean loss and its gradient over `rows`. Samples are reduced in fixed
    /// chunks so the result does not depend on the thread count.
    pub fn loss_and_grad(
        &self,
        data: &SequenceDataset,
        rows: &[usize],
        fault: Option<GradientFault>,
    ) -> (f64, Params) {
        const CHUNK: usize = 4;
        let scale = 1.0 / rows.len().max(1) as f64;
        let parts: Vec<(f64, Params)> = rows
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = self.params.zeros_like();
                let mut loss = 0.0;
                for &i in chunk {
                    let t = self.trace(data.x.index_axis(ndarray::Axis(0), i), data.length(i));
                    let y = data.y[i];
                    loss += cross_entropy(&t.probs, y);
                    let mut d = t.probs.clone();
                    d[y] -= 1.0;
                    d.iter_mut().for_each(|v| *v *= scale);
                    self.backprop(&t, &d, &mut grad, fault);
                }
                (loss, grad)
            })
            .collect();
        let mut total = self.params.zeros_like();
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            total.add_assign(&g);
        }
        (loss * scale, total)
    }

    pub fn evaluate(&self, data: &SequenceDataset) -> Result<EvalReport> {
        let probs = self.forward(data)?;
        Ok(EvalReport::from_probs(probs.view(), &data.y, self.n_classes()))
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        for (name, t) in self.params.tensors() {
            c.push(Tensor::new(name, vec![t.len()], t.to_vec()).expect("1-d shape"));
        }
        c
    }

    /// JSON manifest describing everything except the weights.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "features": self.features,
            "window": self.window,
            "label_names": self.label_names,
            "curve": self.curve,
        })
    }

    /// Rebuilds a model from its manifest and weight container.
    pub fn from_checkpoint(manifest: &serde_json::Value, weights: &Container) -> Result<Self> {
        let config: NetConfig = serde_json::from_value(manifest["config"].clone())?;
        let features: Vec<FeatureInfo> = serde_json::from_value(manifest["features"].clone())?;
        let window: usize = serde_json::from_value(manifest["window"].clone())?;
        let label_names: Vec<String> = serde_json::from_value(manifest["label_names"].clone())?;
        let curve: Vec<EpochStats> =
            serde_json::from_value(manifest["curve"].clone()).unwrap_or_default();
        let mut model = SeqNetModel::new(config, features, window, label_names)?;
        model.curve = curve;
        for (name, slot) in model.params.tensors_mut() {
            let t = weights.get(&name)?;
            if t.data.len() != slot.len() {
                return Err(Error::shape(format!("{name}: {}", slot.len()), t.data.len()));
            }
            slot.copy_from_slice(&t.data);
        }
        Ok(model)
    }
}

fn last_hidden(caches: &[StepCache], hidden: usize) -> Vec<f64> {
    caches.last().map_or_else(|| vec![0.0; hidden], |s| s.h.clone())
}

fn to_matrix(rows: Vec<Vec<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect())
        .expect("rows share width")
}

/// Accuracy, loss and confusion matrix (rows = truth, columns = prediction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub loss: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn from_probs(probs: ArrayView2<f64>, y: &[usize], n_classes: usize) -> Self {
        let mut confusion = vec![vec![0; n_classes]; n_classes];
        let mut loss = 0.0;
        for (row, &label) in probs.rows().into_iter().zip(y) {
            let p = row.to_vec();
            confusion[label][argmax(&p)] += 1;
            loss += cross_entropy(&p, label);
        }
        let total = y.len().max(1) as f64;
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        EvalReport {
            accuracy: correct as f64 / total,
            loss: loss / total,
            confusion,
        }
    }
}

/// Mini-batch gradient descent on mean cross-entropy with global-norm
/// clipping. Shuffling uses `config.seed`.
pub fn train(
    mut model: SeqNetModel,
    data: &SequenceDataset,
    train_rows: &[usize],
    validation: Option<&[usize]>,
) -> Result<SeqNetModel> {
    model.check(data)?;
    let cfg = model.config.clone();
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be >= 1".into()));
    }
    if train_rows.is_empty() {
        return Err(Error::InvalidArgument("no training rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order = train_rows.to_vec();
    let mut last_good = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let (_, mut grad) = model.loss_and_grad(data, batch, None);
            let norm = grad.norm();
            if !norm.is_finite() {
                return Err(Error::Diverged { epoch, last_good });
            }
            if norm > cfg.clip_norm {
                grad.scale(cfg.clip_norm / norm);
            }
            grad.scale(-cfg.learning_rate);
            model.params.add_assign(&grad);
        }
        let train_eval = model.evaluate(&data.subset(train_rows))?;
        if !train_eval.loss.is_finite() {
            return Err(Error::Diverged { epoch, last_good });
        }
        let val = validation
            .map(|rows| model.evaluate(&data.subset(rows)))
            .transpose()?;
        model.curve.push(EpochStats {
            epoch,
            train_loss: train_eval.loss,
            train_accuracy: train_eval.accuracy,
            val_loss: val.as_ref().map(|v| v.loss),
            val_accuracy: val.as_ref().map(|v| v.accuracy),
        });
        last_good = Some(epoch);
    }
    Ok(model)
}
