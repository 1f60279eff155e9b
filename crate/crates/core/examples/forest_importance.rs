//! Fits a random forest on a synthetic log and ranks flat columns by gini
//! importance. The motif columns should come out on top.
//!
//! cargo run --release --example forest_importance -- [seed]

use xlog::forest::{fit_forest, ForestParams};
use xlog::pipeline::{config_in, Prepared};
use xlog::seqnet::EvalReport;
use xlog::synth::{generate_synthetic, SyntheticSpec};

fn main() -> xlog::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let (raw, manifest) = generate_synthetic(&SyntheticSpec::planted(), seed)?;

    let mut cfg = config_in(std::path::Path::new("."));
    cfg.seed = seed;
    cfg.window = 10;
    let (prep, _) = Prepared::build(&cfg, &raw)?;
    let train = prep.flat.subset(&prep.split.train);
    let test = prep.flat.subset(&prep.split.test);
    let classes = prep.flat.label_names.len();

    let max_features = (train.x.ncols() as f64).sqrt().ceil() as usize;
    let model = fit_forest(train.x.view(), &train.y, classes, train.feature_names(), ForestParams::new(200, max_features, seed))?;
    let eval = EvalReport::from_probs(model.predict_proba(test.x.view())?.view(), &test.y, classes);
    println!("{} trees, {max_features} features per split", model.trees.len());
    println!("test accuracy {:.3} on {} cases", eval.accuracy, test.len());

    println!("\ntop gini importances");
    for (name, v) in model.gini_importance().top(8) {
        let planted = if manifest.motif_columns.contains(&name) { "  <- motif" } else { "" };
        println!("  {name:<28} {v:.4}{planted}");
    }
    Ok(())
}
