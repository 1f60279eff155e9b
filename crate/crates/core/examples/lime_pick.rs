//! Explains single forest predictions with LIME, then picks a small set of
//! explanations that together cover the most important features.
//!
//! cargo run --release --example lime_pick -- [seed]

use xlog::explain::lime::{lime_explain, Background, LimeConfig};
use xlog::explain::submodular_pick;
use xlog::forest::{fit_forest, ForestParams};
use xlog::pipeline::{config_in, Prepared};
use xlog::synth::{generate_synthetic, SyntheticSpec};

fn main() -> xlog::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let (raw, _) = generate_synthetic(&SyntheticSpec::planted(), seed)?;
    let mut cfg = config_in(std::path::Path::new("."));
    cfg.seed = seed;
    cfg.window = 10;
    let (prep, _) = Prepared::build(&cfg, &raw)?;
    let train = prep.flat.subset(&prep.split.train);
    let classes = prep.flat.label_names.len();
    let model = fit_forest(train.x.view(), &train.y, classes, train.feature_names(), ForestParams::new(100, 10, seed))?;

    let names = prep.flat.feature_names();
    let categorical: Vec<bool> = prep.flat.columns.iter().map(|c| c.categorical).collect();
    let bg = Background::new(train.x.view(), &names, &categorical)?;

    // Explain the age-rule class on its test cases.
    let class = prep.label_index("R")?;
    let rows: Vec<usize> = prep.split.test.iter().copied().filter(|&r| prep.flat.y[r] == class).collect();
    let mut explanations = Vec::new();
    for &r in &rows {
        let config = LimeConfig::new(5, 2000, seed + r as u64);
        let e = lime_explain(&model, &prep.flat.x.row(r).to_vec(), &prep.flat.case_ids[r], &bg, class, &config)?;
        explanations.push(e);
    }
    let first = &explanations[0];
    println!("case {} (fidelity {:?})", first.instance, first.fidelity.map(|f| (f * 1000.0).round() / 1000.0));
    for w in &first.weights {
        println!("  {:<28} {:+.4}", w.feature, w.weight);
    }

    let summary = submodular_pick(&explanations, 3)?;
    println!("\npicked {:?}, coverage {:.3} of {:.3}", summary.picked, summary.coverage, summary.total_importance);
    let mut ranked: Vec<_> = summary.importance.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(a.1));
    for (f, v) in ranked.into_iter().take(5) {
        println!("  {f:<28} {v:.4}");
    }
    Ok(())
}
