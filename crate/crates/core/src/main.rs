use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xlog::bench::{run_bench, run_criterion, DEFAULT_SEED};
use xlog::explain::lime::Selection;
use xlog::pipeline::{
    cmd_explain, cmd_ingest, cmd_project, cmd_synth, cmd_train, CommandReport, ExplainMethod, ExplainRequest,
    ModelFamily, RunConfig,
};

#[derive(Parser)]
#[command(name = "xlog", version, about = "Event-log classifiers with model-agnostic explanations")]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Work directory for inputs and outputs of every stage.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean, split and encode a CSV event log.
    Ingest(IngestArgs),
    /// Train a forest or a sequence network, with grid search.
    Train(TrainArgs),
    /// Explain the trained forest.
    Explain(ExplainArgs),
    /// Project network activations to 2-D and cluster them.
    Project(ProjectArgs),
    /// Write a synthetic log with planted signals.
    Synth(SynthArgs),
    /// Run the acceptance checks.
    Bench(BenchArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    min_class: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    split: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// forest | dense | lstm | bilstm
    #[arg(long, value_parser = parse_family)]
    model: Option<ModelFamily>,
    /// Forest `1000x100,1500x200`; networks `dense:25:30,lstm:20:200`.
    #[arg(long)]
    grid: Option<String>,
    /// Cross-validation folds for forests (0 ranks on the test split).
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Accepted for symmetry; the split is fixed at ingest.
    #[arg(long)]
    split: Option<f64>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long, value_parser = parse_method)]
    method: ExplainMethod,
    /// Case id to explain (repeatable).
    #[arg(long = "instance")]
    instances: Vec<String>,
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    feature: Option<String>,
    /// tree | linear
    #[arg(long)]
    surrogate: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    /// forward | lasso
    #[arg(long, value_parser = parse_selection)]
    selection: Option<Selection>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    bottleneck: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Try every candidate width and rank them.
    #[arg(long)]
    grid: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON/TOML spec file, or `planted`, `disjoint`, `order`.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "xlog-bench")]
    out: PathBuf,
    /// Run a single criterion.
    #[arg(long)]
    criterion: Option<u8>,
    /// Exit non-zero when a criterion fails.
    #[arg(long)]
    strict: bool,
}

fn parse_family(s: &str) -> Result<ModelFamily, String> {
    ModelFamily::parse(s).ok_or_else(|| format!("unknown model `{s}`"))
}

fn parse_method(s: &str) -> Result<ExplainMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|_| format!("unknown method `{s}`"))
}

fn parse_selection(s: &str) -> Result<Selection, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|_| format!("unknown selection `{s}`"))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Console output; a closed pipe is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print(report: &CommandReport) {
    say(&serde_json::to_string_pretty(&report.summary).unwrap_or_default());
    for p in &report.written {
        say(&format!("wrote {}", p.display()));
    }
}

fn run(cli: Cli) -> xlog::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.paths.workdir, cli.workdir);
    set(&mut cfg.seed, cli.seed);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| xlog::Error::Config(e.to_string()))?;
    }
    let report = match cli.command {
        Command::Ingest(a) => {
            cfg.paths.csv = a.csv.or(cfg.paths.csv);
            cfg.paths.schema = a.schema.or(cfg.paths.schema);
            set(&mut cfg.min_class, a.min_class);
            set(&mut cfg.window, a.window);
            set(&mut cfg.split, a.split);
            cmd_ingest(&cfg)?
        }
        Command::Train(a) => {
            set(&mut cfg.model, a.model);
            cfg.grid = a.grid.or(cfg.grid);
            set(&mut cfg.folds, a.folds);
            set(&mut cfg.learning_rate, a.learning_rate);
            set(&mut cfg.split, a.split);
            cmd_train(&cfg)?
        }
        Command::Explain(a) => {
            set(&mut cfg.explain.k, a.k);
            set(&mut cfg.explain.n_samples, a.samples);
            cfg.explain.sigma = a.sigma.or(cfg.explain.sigma);
            set(&mut cfg.explain.budget, a.budget);
            set(&mut cfg.explain.selection, a.selection);
            let req = ExplainRequest {
                method: a.method,
                instances: a.instances,
                class: a.class,
                feature: a.feature,
                surrogate: a.surrogate,
            };
            cmd_explain(&cfg, &req)?
        }
        Command::Project(a) => {
            set(&mut cfg.latent.layer, a.layer);
            set(&mut cfg.latent.bottleneck, a.bottleneck);
            cfg.latent.k = a.k.or(cfg.latent.k);
            set(&mut cfg.latent.hidden, a.hidden);
            set(&mut cfg.latent.epochs, a.epochs);
            cmd_project(&cfg, a.grid)?
        }
        Command::Synth(a) => {
            cfg.paths.spec = a.spec.or(cfg.paths.spec);
            cmd_synth(&cfg)?
        }
        Command::Bench(a) => {
            let seed = cli.seed.unwrap_or(DEFAULT_SEED);
            let results = match a.criterion {
                Some(id) => vec![run_criterion(id, seed, &a.out)?],
                None => run_bench(&a.out, seed)?.criteria,
            };
            for r in &results {
                let status = if r.passed { "PASS" } else { "FAIL" };
                say(&format!("{status} [{:>2}] {}: {}", r.id, r.name, r.detail));
            }
            return Ok(!a.strict || results.iter().all(|r| r.passed));
        }
    };
    print(&report);
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
