//! `fsem` command-line driver: solves, convergence sweeps, condition-number
//! tables, history caches and fading studies for the manufactured problems.
//!
//! Exit status: 0 on success, 1 on configuration errors, 2 on numerical
//! failures.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{NormArg, SweepArg};
use config::{FadeArg, Settings};

/// Failure classes mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl From<fsem::Error> for Failure {
    fn from(e: fsem::Error) -> Self {
        match e {
            fsem::Error::Numeric(m) => Failure::Numeric(m),
            other => Failure::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fsem", version, about = "Spectral element solver for the 1D fractional Helmholtz equation")]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem; CSV of sampled solution, summary on stderr
    Solve {
        /// Number of equispaced sample points in the CSV
        #[arg(long, default_value_t = 201)]
        samples: usize,
        /// Also report the condition number of the reduced matrix
        #[arg(long, value_enum)]
        condition: Option<NormArg>,
    },
    /// L2 error over a sweep of P or Nel
    Convergence {
        #[arg(long, value_enum, default_value_t = SweepArg::P)]
        sweep: SweepArg,
        /// Comma-separated sweep values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        /// Fail (exit 2) unless the error strictly decreases along the sweep
        #[arg(long)]
        check_decreasing: bool,
    },
    /// Condition numbers over P × Nel for one or both variants
    Condition {
        #[arg(long, value_delimiter = ',', default_value = "3,6,10")]
        ps: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        nels: Vec<usize>,
        #[arg(long, value_enum, default_value_t = NormArg::Inf)]
        norm: NormArg,
    },
    /// Build, inspect or benchmark a history cache
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// L2 error against the number of faded history blocks
    Fading {
        #[arg(long, value_delimiter = ',', default_value = "0,2,5,8,11,14,17")]
        counts: Vec<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "full,p1,p2,p3")]
        cases: Vec<FadeArg>,
    },
    /// Print the element breakpoints and orders
    Grid,
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    /// Compute the uniform-grid history blocks and store them
    Build {
        #[arg(long)]
        nel_max: usize,
        #[arg(long)]
        p_max: usize,
        /// Base quadrature order of the history blocks
        #[arg(long, default_value_t = 20)]
        history_q: usize,
    },
    /// Print the cache header
    Info,
    /// Time retrieval against on-line construction (median of 3)
    Bench,
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let s = &cli.settings;
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Solve { samples, condition } => commands::cmd_solve(s, samples, condition),
        Command::Convergence { sweep, values, check_decreasing } => {
            commands::cmd_convergence(s, sweep, &values, check_decreasing)
        }
        Command::Condition { ps, nels, norm } => commands::cmd_condition(s, &ps, &nels, norm),
        Command::Cache { action } => match action {
            CacheAction::Build { nel_max, p_max, history_q } => commands::cmd_cache_build(s, nel_max, p_max, history_q),
            CacheAction::Info => commands::cmd_cache_info(s),
            CacheAction::Bench => commands::cmd_cache_bench(s),
        },
        Command::Fading { counts, cases } => commands::cmd_fading(s, &counts, &cases),
        Command::Grid => commands::cmd_grid(s),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fsem: {e}");
            ExitCode::from(match e {
                Failure::Config(_) => 1,
                Failure::Numeric(_) => 2,
            })
        }
    }
}
