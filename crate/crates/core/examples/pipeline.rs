//! The whole command sequence in one work directory, as `xlog` runs it:
//! synth, ingest, train (forest and LSTM), explain, project.
//!
//! cargo run --release --example pipeline -- [workdir]

use std::path::PathBuf;

use xlog::pipeline::{
    cmd_explain, cmd_ingest, cmd_project, cmd_synth, cmd_train, config_in, CommandReport, ExplainMethod,
    ExplainRequest, ModelFamily,
};

fn show(r: &CommandReport) {
    println!("{}: {}", r.command, r.summary);
    for p in &r.written {
        println!("  {}", p.display());
    }
}

fn main() -> xlog::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "xlog-work".into()));
    let mut cfg = config_in(&dir);
    cfg.window = 10;
    show(&cmd_synth(&cfg)?);
    cfg.paths.csv = Some(dir.join("synth").join("log.csv"));
    show(&cmd_ingest(&cfg)?);

    cfg.grid = Some("200x10".into());
    show(&cmd_train(&cfg)?);

    let mut pick = ExplainRequest::new(ExplainMethod::Pick);
    pick.class = Some("R".into());
    show(&cmd_explain(&cfg, &pick)?);
    let mut pdp = ExplainRequest::new(ExplainMethod::Pdp);
    pdp.feature = Some("Age".into());
    show(&cmd_explain(&cfg, &pdp)?);

    cfg.model = ModelFamily::Lstm;
    cfg.grid = Some("lstm:20:200".into());
    show(&cmd_train(&cfg)?);
    cfg.latent.epochs = 800;
    show(&cmd_project(&cfg, false)?);
    Ok(())
}
