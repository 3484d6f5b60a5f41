use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rough_nls::{run, ExperimentConfig, ExperimentKind, HarnessError};

/// Batch experiments for the randomized energy-critical NLS toolkit.
#[derive(Parser)]
#[command(name = "rough-nls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cube counts, partition-of-unity and overlap diagnostics.
    PartitionReport(Common),
    /// Composite norms of randomized free evolutions.
    LinearStats(Common),
    /// Forced evolutions with conservation, increment and scattering metrics.
    Evolve(Common),
    /// Interaction Morawetz inequality audits.
    MorawetzAudit(Common),
    /// Divergence of forced runs from the unforced twin.
    TwinLadder(Common),
    /// One run per value of a numeric config field.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "RNLS_WORKERS")]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(kind: ExperimentKind, args: Common) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    cfg.resolve(kind)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcome = run(&cfg, workers)?;
    println!(
        "{}: {} records ({} new, {} skipped), config {}",
        outcome.output.display(),
        outcome.records.len(),
        outcome.executed,
        outcome.skipped,
        outcome.summary.config_hash
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::PartitionReport(a) => (ExperimentKind::PartitionReport, a),
        Command::LinearStats(a) => (ExperimentKind::LinearStats, a),
        Command::Evolve(a) => (ExperimentKind::Evolve, a),
        Command::MorawetzAudit(a) => (ExperimentKind::MorawetzAudit, a),
        Command::TwinLadder(a) => (ExperimentKind::TwinLadder, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
