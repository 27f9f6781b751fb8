use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbsplit_cli::{run, validate, Experiment, ExperimentConfig, RunError};

#[derive(Debug, Parser)]
#[command(name = "fbsplit", version, about = "Forward-backward splitting experiments with certified bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; defaults apply to every key it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Validate the config and exit.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run one forward-backward sequence and write its trace.
    Simulate,
    /// All-pairs distance bound between two sequences.
    VerifyBounds,
    /// One-step inequality and coefficient algebra.
    VerifyLemma,
    /// Exponential-formula error against the flow.
    FlowConvergence,
    /// Integral-solution, Lipschitz, profile and hybrid checks on a trajectory.
    Benilan,
    /// Almost-orbit defects in both directions.
    AlmostOrbit,
    /// Long-time limits of the flow and the sequence.
    Equivalence,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Simulate => Experiment::Simulate,
            Command::VerifyBounds => Experiment::VerifyBounds,
            Command::VerifyLemma => Experiment::VerifyLemma,
            Command::FlowConvergence => Experiment::FlowConvergence,
            Command::Benilan => Experiment::Benilan,
            Command::AlmostOrbit => Experiment::AlmostOrbit,
            Command::Equivalence => Experiment::Equivalence,
        }
    }
}

fn execute(cli: Cli) -> Result<i32, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    let experiment = cli.command.experiment();
    if cli.dry_run {
        println!("ok: {}", validate(experiment, &cfg)?);
        return Ok(0);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(RunError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::Config(e.to_string()))?;
    let outcome = pool.install(|| run(experiment, &cfg))?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    outcome
        .write_to(&dir)
        .map_err(|e| RunError::Config(format!("cannot write to {}: {e}", dir.display())))?;
    for c in &outcome.summary.criteria {
        println!("{} {} (slack {:e}) {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.worst_slack, c.detail);
    }
    if outcome.summary.partial {
        eprintln!("budget exhausted: partial report written to {}", dir.display());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
