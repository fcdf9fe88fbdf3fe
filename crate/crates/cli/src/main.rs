//! `mfglab`: command-line front end for the experiment harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 guardrail breach,
//! 4 empty-equilibrium refusal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfglab_core::harness::Mode;
use mfglab_core::{run_experiment, Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mfglab", version, about = "Mean-field game laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML). Optional for modes whose defaults
    /// suffice; CLI flags override the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; every run derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for manifest/events/summary files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail satisficing tests on unvisited reachable observations, and
    /// validate tolerances against the tolerance report in selfplay.
    #[arg(long, global = true)]
    strict_visitation: bool,
    /// Built-in fixture name (overrides the config's game reference).
    #[arg(long, global = true)]
    fixture: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Export exact J, Q*, V*, W* tables for a profile of the quantized set.
    Solve,
    /// Run naive Q/value learning under a fixed joint policy.
    NaiveLearn,
    /// Run the oracle-level satisficing revision chain.
    OracleDynamics,
    /// Construct and verify satisficing paths from every start profile.
    Paths,
    /// Run phase-based independent learning across seeds.
    Selfplay,
    /// Sweep phase lengths, reporting learning-accuracy frequencies.
    Sweep,
    /// Compute the tolerance report (d̄, Ξ, p_min) for the configured set.
    Tolerance,
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Solve => Mode::Solve,
            Command::NaiveLearn => Mode::NaiveLearn,
            Command::OracleDynamics => Mode::OracleDynamics,
            Command::Paths => Mode::Paths,
            Command::Selfplay => Mode::Selfplay,
            Command::Sweep => Mode::Sweep,
            Command::Tolerance => Mode::Tolerance,
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load_file(path)?,
        // Minimal skeleton; the mode is overridden just below.
        None => ExperimentConfig::load_toml("mode = \"solve\"")?,
    };
    config.mode = cli.command.mode();
    if let Some(fixture) = &cli.fixture {
        config.fixture = Some(fixture.clone());
        config.game_file = None;
    }
    if let Some(workers) = cli.workers {
        config.workers = Some(workers);
    }
    if cli.strict_visitation {
        config.strict_visitation = true;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::config("an output directory is required (--out or `output_dir`)"))?;

    let summary = run_experiment(&config, cli.seed, &out_dir)?;
    print!(
        "mode={:?} runs={} wall_clock_s={:.3}",
        summary.mode, summary.n_runs, summary.wall_clock_s
    );
    if let Some(f) = summary.success_frequency {
        print!(" success_frequency={f:.4}");
    }
    if let (Some(lo), Some(hi)) = (summary.wilson_lower, summary.wilson_upper) {
        print!(" wilson_95=[{lo:.4},{hi:.4}]");
    }
    println!(" out={}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
