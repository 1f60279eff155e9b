//! Explainable predictive process analytics.
//!
//! Trains classifiers on case-centric event logs to predict a per-case label
//! and explains them with model-agnostic tools:
//!
//! - [`eventlog`]: CSV ingestion, label imputation, class filtering, correlation map
//! - [`encode`]: padded sequence tensors, flattened windows, stratified splits
//! - [`forest`]: CART trees, random forests, gini importance
//! - [`seqnet`]: embedding / dense / LSTM / BiLSTM networks with exact backprop
//! - [`explain`]: PDP, ICE, ALE, global surrogates, LIME, submodular pick
//! - [`latent`]: hidden-state capture, 2-D autoencoder projections, k-means
//! - [`synth`]: synthetic logs with planted signals, class-count fixtures
//! - [`pipeline`]: run configuration, stamped outputs and the `xlog` commands
//! - [`bench`]: the acceptance checks behind `xlog bench`

pub mod bench;
pub mod container;
pub mod encode;
pub mod error;
pub mod eventlog;
pub mod explain;
pub mod forest;
pub mod latent;
pub mod linalg;
pub mod pipeline;
pub mod seqnet;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
