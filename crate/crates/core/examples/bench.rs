//! Runs the acceptance checks through the library and prints their
//! measurements.
//!
//! cargo run --release --example bench -- [out_dir] [seed]

use std::path::PathBuf;

use xlog::bench::{run_bench, DEFAULT_SEED};

fn main() -> xlog::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "xlog-bench".into()));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED);
    let report = run_bench(&out, seed)?;
    for c in &report.criteria {
        println!("{} [{:>2}] {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name);
        println!("      {}", c.measured);
    }
    println!("{}/{} passed; evidence in {}", report.passed, report.total, out.display());
    Ok(())
}
