//! `spawnsim`: fit spawn-dynamics models from trajectory data and drive
//! crowd simulations with them.
//!
//! Subcommands: `ingest`, `fit`, `simulate`, `evaluate`, `ablate`, `synth`.
//! All of them read one TOML config (`--config`, or `SPAWNSIM_CONFIG`);
//! `--seed` / `SPAWNSIM_SEED` override the master seed and `--jobs` /
//! `SPAWNSIM_JOBS` bound internal parallelism. Flags beat environment
//! variables, which beat the config file.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 invariant
//! violation.

mod commands;
mod errors;

use clap::{Parser, Subcommand};
use errors::CliError;
use spawnsim_core::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spawnsim", version, about)]
struct Cli {
    /// Path to the run config (TOML). Env: SPAWNSIM_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override. Env: SPAWNSIM_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Thread budget for internal parallelism. Env: SPAWNSIM_JOBS.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate, and canonicalize the trajectory dataset.
    Ingest,
    /// Fit spatial, temporal, and (optionally) policy models.
    Fit,
    /// Run one orchestrated simulation from fitted models.
    Simulate {
        /// Swap the neural spawn model for the fitted Poisson baseline.
        #[arg(long, value_name = "MODEL")]
        baseline: Option<String>,
    },
    /// Compare ground truth against neural and Poisson orchestration.
    Evaluate,
    /// Run the hyperparameter grid (resumes completed cells).
    Ablate,
    /// Generate a planted-truth synthetic dataset.
    Synth,
}

fn env_u64(name: &str) -> Result<Option<u64>, CliError> {
    match std::env::var(name) {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{name} must be an integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var("SPAWNSIM_CONFIG").ok().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Config("no config given (use --config or SPAWNSIM_CONFIG)".into())
        })?;
    let mut config = RunConfig::load(&config_path).map_err(CliError::from)?;
    if let Some(seed) = cli.seed.or(env_u64("SPAWNSIM_SEED")?) {
        config.master_seed = seed;
    }
    let jobs = match cli.jobs {
        Some(j) => Some(j),
        None => env_u64("SPAWNSIM_JOBS")?.map(|j| j as usize),
    };
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be >= 1".into()));
        }
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    Ok(config)
}

fn dispatch(cli: &Cli, config: &RunConfig) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest => commands::ingest(config),
        Command::Fit => commands::fit(config),
        Command::Simulate { baseline } => {
            let poisson = match baseline.as_deref() {
                None => false,
                Some("poisson") => true,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown baseline '{other}' (only 'poisson' is available)"
                    )))
                }
            };
            commands::simulate(config, poisson).map(|_| ())
        }
        Command::Evaluate => commands::evaluate(config),
        Command::Ablate => commands::ablate(config),
        Command::Synth => commands::synth(config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match dispatch(&cli, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
