//! Latent projections of intercepted hidden layers.
//!
//! Activations of a trained sequence network are captured per instance, an
//! autoencoder squeezes them through a 2-D bottleneck, and k-means on the
//! bottleneck coordinates exposes cluster structure and instances whose
//! predicted label disagrees with their neighborhood.

pub mod autoencoder;
pub mod cluster;

pub use autoencoder::{fit_autoencoder, AeConfig, Autoencoder, BOTTLENECK};
pub use cluster::{kmeans, kmeans_single, silhouette, KMeans, DEFAULT_RESTARTS};

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::SequenceDataset;
use crate::error::{Error, Result};
use crate::seqnet::{Architecture, SeqNetModel};

pub const DEFAULT_AE_CANDIDATES: [usize; 5] = [2, 4, 8, 16, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMatrix {
    pub layer: usize,
    pub architecture: Option<Architecture>,
    pub values: Array2<f64>,
    pub ids: Vec<String>,
    pub true_labels: Vec<usize>,
    pub predicted: Vec<usize>,
    pub label_names: Vec<String>,
}

impl ActivationMatrix {
    /// Activations from any source; ids default to row numbers.
    pub fn from_parts(
        values: Array2<f64>,
        true_labels: Vec<usize>,
        predicted: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = values.nrows();
        if true_labels.len() != n || predicted.len() != n {
            return Err(Error::shape(n, true_labels.len().min(predicted.len())));
        }
        Ok(ActivationMatrix {
            layer: 0,
            architecture: None,
            values,
            ids: (0..n).map(|i| i.to_string()).collect(),
            true_labels,
            predicted,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> ActivationMatrix {
        ActivationMatrix {
            values: self.values.select(ndarray::Axis(0), rows),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            true_labels: rows.iter().map(|&i| self.true_labels[i]).collect(),
            predicted: rows.iter().map(|&i| self.predicted[i]).collect(),
            ..self.clone()
        }
    }
}

/// Records layer `layer` of `model` for every instance of `data`: layer 0 is
/// the last hidden state of the recurrent layer over the unpadded prefix
/// (both directions concatenated for a BiLSTM), layer 1 the dense layer.
pub fn capture_activations(model: &SeqNetModel, data: &SequenceDataset, layer: usize) -> Result<ActivationMatrix> {
    let values = model.activations(data, layer)?;
    let predicted = model.predict(data)?;
    Ok(ActivationMatrix {
        layer,
        architecture: Some(model.config.architecture),
        values,
        ids: data.case_ids.clone(),
        true_labels: data.y.clone(),
        predicted,
        label_names: model.label_names.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentProjection {
    /// `M x 2`.
    pub coords: Array2<f64>,
    pub ids: Vec<String>,
    pub true_labels: Vec<usize>,
    pub predicted: Vec<usize>,
    pub label_names: Vec<String>,
    /// Empty until clustered.
    pub clusters: Vec<usize>,
    pub purity: Option<f64>,
}

/// Encoder pass over `acts`.
pub fn project(ae: &Autoencoder, acts: &ActivationMatrix) -> Result<LatentProjection> {
    Ok(LatentProjection {
        coords: ae.encode(acts.values.view())?,
        ids: acts.ids.clone(),
        true_labels: acts.true_labels.clone(),
        predicted: acts.predicted.clone(),
        label_names: acts.label_names.clone(),
        clusters: Vec::new(),
        purity: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub cluster: usize,
    pub size: usize,
    pub majority_label: usize,
    pub purity: f64,
    /// Instances whose predicted label differs from the majority true label.
    pub misclassified: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub clusters: Vec<ClusterInfo>,
    pub assignment: Vec<usize>,
    pub purity: f64,
    pub inertia: f64,
    pub silhouette: f64,
}

impl ClusterReport {
    pub fn misclassified(&self) -> impl Iterator<Item = &str> {
        self.clusters.iter().flat_map(|c| c.misclassified.iter().map(String::as_str))
    }
}

/// Majority label (ties to the smaller label) and its count.
fn majority(labels: impl Iterator<Item = usize>) -> (usize, usize) {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    labels.for_each(|l| *counts.entry(l).or_default() += 1);
    counts
        .into_iter()
        .fold((0, 0), |best, (l, c)| if c > best.1 { (l, c) } else { best })
}

/// Clusters the coordinates with seeded k-means and lists, per cluster, the
/// instances predicted as something other than the cluster's majority label.
pub fn analyze_misclassifications(proj: &LatentProjection, k: usize, seed: u64) -> Result<ClusterReport> {
    let km = kmeans(proj.coords.view(), k, DEFAULT_RESTARTS, seed)?;
    let mut clusters = Vec::new();
    let mut agreeing = 0;
    for c in 0..k {
        let members: Vec<usize> = (0..proj.ids.len()).filter(|&i| km.assignment[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let (label, count) = majority(members.iter().map(|&i| proj.true_labels[i]));
        agreeing += count;
        clusters.push(ClusterInfo {
            cluster: c,
            size: members.len(),
            majority_label: label,
            purity: count as f64 / members.len() as f64,
            misclassified: members
                .iter()
                .filter(|&&i| proj.predicted[i] != label)
                .map(|&i| proj.ids[i].clone())
                .collect(),
        });
    }
    Ok(ClusterReport {
        k,
        silhouette: silhouette(proj.coords.view(), &km.assignment),
        purity: agreeing as f64 / proj.ids.len() as f64,
        inertia: km.inertia,
        assignment: km.assignment,
        clusters,
    })
}

impl LatentProjection {
    pub fn with_clusters(mut self, report: &ClusterReport) -> Self {
        self.clusters.clone_from(&report.assignment);
        self.purity = Some(report.purity);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeGridRow {
    pub hidden: usize,
    pub final_mse: f64,
    pub silhouette: f64,
    pub rank: usize,
    pub flag: Option<String>,
}

/// One autoencoder per hidden width, ranked by the silhouette of a k-means
/// clustering of its projection (ties to the narrower network). Returns the
/// table in rank order and the projections in candidate order.
pub fn grid_search_ae(
    acts: &ActivationMatrix,
    candidates: &[usize],
    epochs: usize,
    learning_rate: f64,
    k: usize,
    seed: u64,
) -> Result<(Vec<AeGridRow>, Vec<(usize, LatentProjection)>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no autoencoder candidates".into()));
    }
    let fitted: Vec<(AeGridRow, LatentProjection)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, &hidden)| {
            let ae = fit_autoencoder(
                acts.values.view(),
                AeConfig::new(hidden, epochs, learning_rate, seed.wrapping_add(i as u64)),
            )?;
            let proj = project(&ae, acts)?;
            let report = analyze_misclassifications(&proj, k.min(acts.len()), seed)?;
            Ok((
                AeGridRow {
                    hidden,
                    final_mse: ae.final_mse,
                    silhouette: report.silhouette,
                    rank: 0,
                    flag: ae.flag.clone(),
                },
                proj.with_clusters(&report),
            ))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<AeGridRow> = fitted.iter().map(|(r, _)| r.clone()).collect();
    rows.sort_by(|a, b| b.silhouette.total_cmp(&a.silhouette).then(a.hidden.cmp(&b.hidden)));
    rows.iter_mut().enumerate().for_each(|(i, r)| r.rank = i + 1);
    let projections = fitted.into_iter().map(|(r, p)| (r.hidden, p)).collect();
    Ok((rows, projections))
}

/// Gaussian blobs in `dim` dimensions, one per class, `per_class` rows each.
pub fn gaussian_blobs(classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> ActivationMatrix {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let n = classes * per_class;
    let labels: Vec<usize> = (0..n).map(|i| i / per_class).collect();
    let values = Array2::from_shape_fn((n, dim), |(i, j)| centers[labels[i]][j] + noise.sample(&mut rng));
    ActivationMatrix::from_parts(values, labels.clone(), labels, (0..classes).map(|c| format!("c{c}")).collect())
        .expect("consistent shapes")
}

/// Cluster purity of arbitrary coordinates against labels.
pub fn purity(coords: ArrayView2<f64>, labels: &[usize], k: usize, seed: u64) -> Result<f64> {
    let km = kmeans(coords, k, DEFAULT_RESTARTS, seed)?;
    let agreeing: usize = (0..k)
        .map(|c| majority((0..labels.len()).filter(|&i| km.assignment[i] == c).map(|i| labels[i])).1)
        .sum();
    Ok(agreeing as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqnet::tests::toy_data;
    use crate::seqnet::NetConfig;

    fn proj(coords: Vec<[f64; 2]>, labels: Vec<usize>, predicted: Vec<usize>) -> LatentProjection {
        LatentProjection {
            coords: Array2::from_shape_fn((coords.len(), 2), |(i, j)| coords[i][j]),
            ids: (0..labels.len()).map(|i| format!("case{i}")).collect(),
            true_labels: labels,
            predicted,
            label_names: vec!["a".into(), "b".into()],
            clusters: Vec::new(),
            purity: None,
        }
    }

    #[test]
    fn separated_blobs_have_pure_clusters() {
        let p = proj(vec![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]], vec![0, 0, 1, 1], vec![0, 0, 1, 1]);
        let r = analyze_misclassifications(&p, 2, 0).unwrap();
        assert_eq!(r.purity, 1.0);
        assert_eq!(r.misclassified().count(), 0);
        let one = analyze_misclassifications(&p, 1, 0).unwrap();
        assert_eq!(one.purity, 0.5);
        assert!(analyze_misclassifications(&p, 5, 0).is_err());
    }

    #[test]
    fn planted_outlier_is_listed() {
        let mut coords = vec![[0.0, 0.0], [0.1, 0.1], [0.0, 0.2], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]];
        coords.push([5.05, 5.05]);
        let p = proj(coords, vec![0, 0, 0, 1, 1, 1, 0], vec![0, 0, 0, 1, 1, 1, 0]);
        let r = analyze_misclassifications(&p, 2, 3).unwrap();
        let b = r.clusters.iter().find(|c| c.majority_label == 1).unwrap();
        assert_eq!(b.misclassified, vec!["case6"]);
        assert!((r.purity - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn capture_widths_and_purity() {
        let seqs: [(&[usize], f64, usize); 3] = [(&[0, 1, 2], 0.5, 0), (&[0, 1, 2], 0.5, 0), (&[2, 1], 0.1, 1)];
        let data = toy_data(&seqs, 4);
        let lstm = SeqNetModel::for_dataset(NetConfig::new(Architecture::Lstm, 20, 1), &data).unwrap();
        let acts = capture_activations(&lstm, &data, 0).unwrap();
        assert_eq!(acts.width(), 20);
        assert_eq!(acts.values.row(0), acts.values.row(1));
        let bi = SeqNetModel::for_dataset(NetConfig::new(Architecture::BiLstm, 20, 1), &data).unwrap();
        assert_eq!(capture_activations(&bi, &data, 0).unwrap().width(), 40);
        assert!(capture_activations(&bi, &data, 2).is_err());
    }

    #[test]
    fn bilstm_capture_is_concatenation_of_directions() {
        let seqs: [(&[usize], f64, usize); 3] = [(&[0, 1, 2], 0.5, 0), (&[2, 2], 0.2, 1), (&[1], 0.9, 0)];
        let data = toy_data(&seqs, 4);
        let bi = SeqNetModel::for_dataset(NetConfig::new(Architecture::BiLstm, 3, 1).with_seed(4), &data).unwrap();
        let both = capture_activations(&bi, &data, 0).unwrap();
        let mut fwd = SeqNetModel::for_dataset(NetConfig::new(Architecture::Lstm, 3, 1), &data).unwrap();
        fwd.params.embeddings.clone_from(&bi.params.embeddings);
        fwd.params.forward.clone_from(&bi.params.forward);
        let mut bwd = fwd.clone();
        bwd.params.forward.clone_from(&bi.params.backward);
        let reversed: Vec<(Vec<usize>, f64, usize)> = seqs
            .iter()
            .map(|(s, v, y)| (s.iter().rev().copied().collect(), *v, *y))
            .collect();
        let rev_refs: Vec<(&[usize], f64, usize)> = reversed.iter().map(|(s, v, y)| (s.as_slice(), *v, *y)).collect();
        let rev = toy_data(&rev_refs, 4);
        let f = capture_activations(&fwd, &data, 0).unwrap();
        let b = capture_activations(&bwd, &rev, 0).unwrap();
        for i in 0..3 {
            let mut expect = f.values.row(i).to_vec();
            expect.extend(b.values.row(i).iter());
            assert_eq!(both.values.row(i).to_vec(), expect);
        }
    }

    #[test]
    fn blobs_project_to_separated_clusters() {
        let acts = gaussian_blobs(3, 40, 20, 0.05, 7);
        let ae = fit_autoencoder(acts.values.view(), AeConfig::new(8, 800, 0.1, 1)).unwrap();
        let p = project(&ae, &acts).unwrap();
        assert!(p.coords.iter().all(|v| v.is_finite()));
        assert_eq!(p, project(&ae, &acts).unwrap());
        let r = analyze_misclassifications(&p, 3, 1).unwrap();
        assert!(r.silhouette > 0.5, "{}", r.silhouette);
        assert!(r.purity >= 0.9);
    }

    #[test]
    fn grid_search_single_candidate_and_determinism() {
        let acts = gaussian_blobs(2, 10, 6, 0.05, 2);
        let (rows, projs) = grid_search_ae(&acts, &[4], 50, 0.1, 2, 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(projs.len(), 1);
        let a = grid_search_ae(&acts, &[2, 4, 8], 50, 0.1, 2, 0).unwrap();
        let b = grid_search_ae(&acts, &[2, 4, 8], 50, 0.1, 2, 0).unwrap();
        assert_eq!(a, b);
        assert!(grid_search_ae(&acts, &[], 5, 0.1, 2, 0).is_err());
    }
}
