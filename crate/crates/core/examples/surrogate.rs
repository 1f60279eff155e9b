//! Approximates a forest with a shallow tree and with per-class ridge
//! regressions, reporting fidelity to the forest (not to the labels).
//!
//! cargo run --release --example surrogate

use xlog::explain::{fit_global_surrogate, SurrogateKind};
use xlog::forest::{fit_forest, ForestParams};
use xlog::pipeline::{config_in, Prepared};
use xlog::synth::{generate_synthetic, SyntheticSpec};

fn main() -> xlog::Result<()> {
    let (raw, _) = generate_synthetic(&SyntheticSpec::planted(), 11)?;
    let mut cfg = config_in(std::path::Path::new("."));
    cfg.window = 10;
    let (prep, _) = Prepared::build(&cfg, &raw)?;
    let classes = prep.flat.label_names.len();
    let model = fit_forest(prep.flat.x.view(), &prep.flat.y, classes, prep.flat.feature_names(), ForestParams::new(100, 10, 11))?;

    for kind in [SurrogateKind::Tree { max_depth: 2 }, SurrogateKind::Tree { max_depth: 4 }, SurrogateKind::Linear { lambda: 1e-3 }] {
        let r = fit_global_surrogate(&model, prep.flat.x.view(), kind)?;
        let r2: Vec<String> = r.r2_per_class.iter().map(|v| v.map_or("-".into(), |v| format!("{v:.3}"))).collect();
        println!("{kind:?}: label agreement {:.3}, R2 per class [{}]", r.agreement, r2.join(", "));
    }
    Ok(())
}
