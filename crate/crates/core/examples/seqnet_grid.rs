//! Trains dense, LSTM and BiLSTM classifiers on a log whose classes differ
//! only in the order of the same three activities.
//!
//! cargo run --release --example seqnet_grid -- [seed]

use xlog::pipeline::{config_in, Prepared};
use xlog::seqnet::{grid_search, Architecture, GridSpace};
use xlog::synth::{generate_synthetic, SyntheticSpec};

fn main() -> xlog::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (raw, _) = generate_synthetic(&SyntheticSpec::order_only(), seed)?;
    let mut cfg = config_in(std::path::Path::new("."));
    cfg.seed = seed;
    cfg.window = 10;
    let (prep, _) = Prepared::build(&cfg, &raw)?;

    let mut space = GridSpace::reference();
    space.configs = vec![
        (Architecture::Dense, 25, 30),
        (Architecture::Lstm, 20, 200),
        (Architecture::BiLstm, 20, 150),
    ];
    let (rows, models) = grid_search(&space, &prep.sequences, &prep.split, seed)?;
    println!("{:<8} {:>6} {:>7} {:>9} {:>8}", "model", "nodes", "epochs", "accuracy", "loss");
    for r in &rows {
        let mark = if r.best { " *" } else { "" };
        println!("{:<8} {:>6} {:>7} {:>9.3} {:>8.4}{mark}", r.architecture.name(), r.nodes, r.epochs, r.accuracy, r.loss);
    }
    let best = rows.iter().position(|r| r.best).unwrap_or(0);
    println!("\nconfusion of the best model: {:?}", models[best].evaluate(&prep.sequences.subset(&prep.split.test))?.confusion);
    Ok(())
}
