//! `extlab`: reproducible experiments on self-adjoint extensions, index pairings and
//! surface K-homology sums.
//!
//! Exit codes: 0 pass, 1 property failure, 2 invalid input, 3 numerical instability.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Outcome, Suite};
use config::ExperimentConfig;
use extlab::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "extlab", version, about = "Self-adjoint extension and index pairing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for report.json, CSV tables and plots.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write an SVG plot where the command has one.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deficiency indices and orthonormal bases.
    Deficiency,
    /// Boundary matrices of extensions, numeric and closed form.
    BoundaryMatrix,
    /// Eigenvalues in the configured window.
    Spectrum,
    /// Index pairings of loops with extensions.
    Pair,
    /// Run a property suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Chern characters of surface sum classes.
    Ksum,
}

fn env_tolerance() -> Result<Option<f64>> {
    match std::env::var("EXTLAB_TOL") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(Some(t)),
            _ => Err(Error::Validation(format!("EXTLAB_TOL must be a positive number, got {s:?}"))),
        },
    }
}

fn run(cli: Cli) -> Result<(Outcome, String)> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.jobs == 0 {
        return Err(Error::Validation("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let hash = report::config_hash(&config.canonical());
    let ctx = Context {
        seed: cli.seed.or(config.seed),
        tolerance: env_tolerance()?.or(config.tolerance),
        config,
        pool,
        svg: cli.svg,
    };
    let outcome = match cli.command {
        Command::Deficiency => commands::deficiency(&ctx),
        Command::BoundaryMatrix => commands::boundary_matrix(&ctx),
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Pair => commands::pair_cmd(&ctx),
        Command::Verify { suite } => commands::verify(&ctx, suite),
        Command::Ksum => commands::ksum(&ctx),
    }?;
    let json = outcome.report.to_json(&hash, outcome.seed, outcome.tolerance);
    if let Some(dir) = &cli.out {
        outcome.report.write(dir, &json)?;
    }
    Ok((outcome, json))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((outcome, json)) => {
            print!("{json}");
            ExitCode::from(outcome.status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
