//! Generates a planted-signal log, cleans a log shaped like the hospital
//! class table, and prints the attribute correlation map.
//!
//! cargo run --example synth_and_clean -- [seed]

use xlog::eventlog::{clean_log, correlation_matrix, Attribute};
use xlog::synth::{class_count_log, generate_synthetic, SyntheticSpec, HOSPITAL_CLASS_COUNTS};

fn main() -> xlog::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);

    let (log, manifest) = generate_synthetic(&SyntheticSpec::planted(), seed)?;
    println!("synthetic: {} cases, {} events", log.len(), log.event_count());
    for (class, motif) in &manifest.motifs {
        println!("  {class}: motif {motif:?}");
    }
    println!("  motif columns {:?}", manifest.motif_columns);

    let hospital = class_count_log(&HOSPITAL_CLASS_COUNTS, seed)?;
    let (clean, report) = clean_log(&hospital, 30)?;
    println!("\nclass filter at 30 cases: {} -> {} cases", hospital.len(), clean.len());
    println!("  kept    {:?}", report.kept_classes);
    println!("  dropped {:?}", report.dropped_classes);

    let attrs = [Attribute::Activity, Attribute::Department, Attribute::Age, Attribute::Years];
    let corr = correlation_matrix(&log, &attrs)?;
    println!("\ncorrelation (categoricals by frequency rank)");
    print!("{:>14}", "");
    for f in &corr.features {
        print!("{f:>14}");
    }
    println!();
    for (f, row) in corr.features.iter().zip(&corr.values) {
        print!("{f:>14}");
        for v in row {
            print!("{v:>14.3}");
        }
        println!();
    }
    Ok(())
}
