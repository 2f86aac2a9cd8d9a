use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use erlang_lab::config::{ExperimentConfig, RunKind};
use erlang_lab::figures::check_figure_id;
use erlang_lab::run::run;
use erlang_lab::LabResult;

/// Simulation, fluid and generating-function experiments for the
/// nonstationary Erlang-A queue.
#[derive(Debug, Parser)]
#[command(name = "erlang-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replications per ensemble
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// RK4 step for fluid integrations
    #[arg(long = "h-step", global = true)]
    h_step: Option<f64>,
    /// Step-halving tolerance for fluid integrations
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ensemble moments and MGF estimates
    Simulate,
    /// Fluid moments and diffusion variance
    Fluid,
    /// Fluid CGF surface, or the stationary fluid law
    Genfun,
    /// Ordering checks against the fluid approximation
    Verify,
    /// Reproduce a figure by id
    Figure {
        /// One of fig1, moments-small, moments-large, mgf-surfaces, limdists,
        /// single-server-limdists, ns-sandwich
        id: Option<String>,
    },
}

fn execute(cli: Cli) -> LabResult<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    let kind = match &cli.command {
        Command::Simulate => RunKind::Simulate,
        Command::Fluid => RunKind::Fluid,
        Command::Genfun => RunKind::Genfun,
        Command::Verify => RunKind::Verify,
        Command::Figure { id } => {
            if let Some(id) = id {
                cfg.figure = Some(id.clone());
            }
            RunKind::Figure
        }
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = cli.common.reps {
        cfg.reps = reps;
    }
    if cli.common.h_step.is_some() {
        cfg.h_step = cli.common.h_step;
    }
    if cli.common.tolerance.is_some() {
        cfg.tolerance = cli.common.tolerance;
    }
    cfg.validate()?;
    if kind == RunKind::Figure {
        if let Some(id) = &cfg.figure {
            check_figure_id(id)?;
        }
    }
    let out = cli.common.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = run(kind, &cfg, &out)?;
    for line in &result.lines {
        println!("{line}");
    }
    for file in &result.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
