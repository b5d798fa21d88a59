//! `optree`: density estimation with optional Pólya tree priors.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Settings;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "optree", version, about = "Optional Pólya tree density estimation")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "OPTREE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a density from a CSV sample.
    Estimate {
        /// TOML file with the same keys as the long flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a sample from a reference law as CSV.
    Simulate {
        /// SpikyUniforms, BetaMixture, UniformSemiBeta2D or BivariateNormal2D.
        #[arg(long)]
        generator: String,
        #[arg(long, short = 'n')]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Draw random partitions with masses from the prior.
    SamplePrior {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        draws: u64,
        #[arg(long, default_value_t = 10)]
        max_depth: u32,
        #[command(flatten)]
        settings: Settings,
    },
    /// Compare the recursion with exact enumeration on small binary tables.
    OracleCheck {
        #[arg(long, short = 'p')]
        p: usize,
        #[arg(long, short = 'n')]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check every dimension up to p and every sample size up to n.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {t} threads: {e}")))?;
    }
    match cli.command {
        Command::Estimate { config, settings } => {
            let file = Settings::load(config.as_deref())?;
            commands::estimate(settings.over(file))
        }
        Command::Simulate {
            generator,
            n,
            seed,
            output,
        } => commands::simulate(&generator, n, seed, &output),
        Command::SamplePrior {
            config,
            draws,
            max_depth,
            settings,
        } => {
            let file = Settings::load(config.as_deref())?;
            commands::sample_prior(settings.over(file), draws, max_depth)
        }
        Command::OracleCheck {
            p,
            n,
            trials,
            seed,
            sweep,
            output,
        } => commands::oracle(p, n, trials, seed, sweep, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optree: {e}");
            e.exit_code()
        }
    }
}
