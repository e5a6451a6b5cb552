mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cloner_core::ClonerError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Simulator for phase-reference-free probabilistic cloning of coherent states.
#[derive(Debug, Parser)]
#[command(name = "cloner", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Worker threads, 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Fock truncation for commands that use one, 0 applies the automatic rule.
    #[arg(long, global = true, default_value_t = 0)]
    pub fock_dim: usize,
    /// Override the number of displacement phases in the ring.
    #[arg(long, global = true)]
    pub ring_points: Option<usize>,
    /// Output directory. A manifest.json is written next to the outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schedule {
    Harmonic,
    Uniform,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Ensemble,
    Fock,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Metrics of one configuration (fidelity, gain, success, covariances).
    Clone {
        #[arg(long)]
        config: PathBuf,
        /// Also run the truncated Fock-space model and report its numbers.
        #[arg(long)]
        oracle: bool,
    },
    /// Optimize the displacement for every amplitude and threshold of a sweep spec.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Clone covariances for thresholds 0..=max-threshold.
    Covar {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_threshold: u32,
    },
    /// Wigner function of one clone on a square grid.
    Wigner {
        #[arg(long)]
        config: PathBuf,
        /// Override the threshold of the configuration.
        #[arg(long)]
        threshold: Option<u32>,
        #[arg(long, default_value_t = 6.0)]
        half_width: f64,
        #[arg(long, default_value_t = 241)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Backend::Ensemble)]
        backend: Backend,
    },
    /// Displacement needed for a target amplitude gain at each threshold.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        gain: f64,
        #[arg(long, default_value_t = 5)]
        max_threshold: u32,
    },
    /// Pulse-by-pulse Monte Carlo run; stores counts and homodyne samples.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pulses: u64,
        #[arg(long, value_enum, default_value_t = Schedule::Harmonic)]
        schedule: Schedule,
        /// Period of the harmonic LO schedule in pulses.
        #[arg(long, default_value_t = 1000)]
        period: u64,
        /// Only store pulses with at least this many counts.
        #[arg(long, default_value_t = 0)]
        min_stored: u64,
    },
    /// Apply thresholds to a stored Monte Carlo run.
    Reherald {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        thresholds: Vec<u64>,
    },
    /// Maximum-likelihood reconstruction of one clone from a stored run.
    Tomo {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        threshold: u64,
        #[arg(long, default_value_t = 1)]
        clone: u8,
        #[arg(long, default_value_t = cloner_core::tomography::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = cloner_core::tomography::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = cloner_core::tomography::DEFAULT_THETA_BINS)]
        theta_bins: usize,
        #[arg(long, default_value_t = cloner_core::tomography::DEFAULT_X_BINS)]
        x_bins: usize,
    },
}

fn exit_code(e: &ClonerError) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CLONER_LOG", "warn")).init();
    if cli.global.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
