//! Partial dependence, ICE and ALE of a forest on the age column, written
//! as SVG plots.
//!
//! cargo run --release --example curves -- [out_dir]

use std::path::PathBuf;

use xlog::explain::{ale, ice, pdp, quantile_grid};
use xlog::forest::{fit_forest, ForestParams};
use xlog::pipeline::{config_in, Prepared};
use xlog::svg::{lines, Axes};
use xlog::synth::{generate_synthetic, SyntheticSpec};

fn main() -> xlog::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "curves-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlog::Error::io(&out, e))?;
    let (raw, _) = generate_synthetic(&SyntheticSpec::planted(), 5)?;
    let mut cfg = config_in(&out);
    cfg.window = 10;
    let (prep, _) = Prepared::build(&cfg, &raw)?;
    let train = prep.flat.subset(&prep.split.train);
    let classes = prep.flat.label_names.len();
    let model = fit_forest(train.x.view(), &train.y, classes, train.feature_names(), ForestParams::new(100, 10, 5))?;

    let age = train.feature_names().iter().position(|n| n == "Age").expect("Age column");
    let class = prep.label_index("R")?;
    let grid = quantile_grid(train.x.view(), age, 15);
    let ice = ice(&model, train.x.view(), age, &grid, class)?;
    let pdp = pdp(&model, train.x.view(), age, &grid, class)?;
    let ale = ale(&model, train.x.view(), age, 10, class)?;

    let axes = Axes { x_label: "Age (scaled)", y_label: "P(R)" };
    let mut series = pdp.values.clone();
    series.extend(ice.values.iter().cloned());
    let plots = [
        ("ice.svg", lines("ICE and PDP of Age", &axes, &grid, &series, 1)),
        ("ale.svg", lines("ALE of Age", &Axes { x_label: "Age (scaled)", y_label: "effect" }, &ale.grid, &ale.values, 1)),
    ];
    for (name, doc) in plots {
        let path = out.join(name);
        std::fs::write(&path, doc).map_err(|e| xlog::Error::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    println!("PDP rises from {:.3} to {:.3} across the grid", pdp.values[0][0], pdp.values[0][grid.len() - 1]);
    Ok(())
}
