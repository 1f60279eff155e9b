//! Captures LSTM hidden states, squeezes them to 2-D with an autoencoder and
//! clusters the projection. Cases that sit in another class's cluster are
//! listed as misclassified.
//!
//! cargo run --release --example latent_projection -- [out_dir]

use std::path::PathBuf;

use xlog::latent::{analyze_misclassifications, capture_activations, fit_autoencoder, project, AeConfig};
use xlog::pipeline::{config_in, Prepared};
use xlog::seqnet::{train, Architecture, NetConfig, SeqNetModel};
use xlog::svg::{scatter, Axes};
use xlog::synth::{generate_synthetic, SyntheticSpec};

fn main() -> xlog::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "latent-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlog::Error::io(&out, e))?;
    let (raw, _) = generate_synthetic(&SyntheticSpec::disjoint_motifs(), 9)?;
    let mut cfg = config_in(&out);
    cfg.window = 10;
    let (prep, _) = Prepared::build(&cfg, &raw)?;

    let net = SeqNetModel::for_dataset(NetConfig::new(Architecture::Lstm, 16, 200).with_seed(9), &prep.sequences)?;
    let net = train(net, &prep.sequences, &prep.split.train, None)?;
    let eval = net.evaluate(&prep.sequences.subset(&prep.split.test))?;
    println!("LSTM test accuracy {:.3}", eval.accuracy);
    let acts = capture_activations(&net, &prep.sequences, 0)?;
    println!("captured {} x {} activations", acts.len(), acts.width());

    let ae = fit_autoencoder(acts.subset(&prep.split.train).values.view(), AeConfig::new(8, 1000, 0.05, 9))?;
    let proj = project(&ae, &acts)?;
    let report = analyze_misclassifications(&proj, 3, 9)?;
    println!("k-means purity {:.3}, silhouette {:.3}", report.purity, report.silhouette);
    for c in &report.clusters {
        println!("  cluster {} size {} majority {} predicted otherwise {:?}", c.cluster, c.size, proj.label_names[c.majority_label], c.misclassified);
    }

    let points: Vec<(f64, f64)> = proj.coords.rows().into_iter().map(|r| (r[0], r[1])).collect();
    let doc = scatter("LSTM states in 2-D", &Axes { x_label: "z1", y_label: "z2" }, &points, &proj.true_labels, &proj.predicted, &proj.label_names);
    let path = out.join("projection.svg");
    std::fs::write(&path, doc).map_err(|e| xlog::Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}
