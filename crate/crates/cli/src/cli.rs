//! Argument parsing and dispatch for the mixclean binary.

use crate::commands::{self, CommandContext};
use crate::error::{CliError, Result};
use crate::io;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "mixclean",
    version,
    about = "Label-noise modelling with per-sample multinomial mixtures"
)]
pub struct Cli {
    /// JSON config file; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Root random seed; every stochastic step derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory that receives all artifacts and the run manifest.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,

    /// Worker threads; 0 picks one per core (MIXCLEAN_THREADS overrides 0).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Suppress the one-line progress summaries on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Show two distinct prior/transition factorizations with one marginal.
    DemoNonidentifiability,
    /// Fit one multinomial mixture to a CSV of label-count sets.
    Fit {
        /// Count matrix: one label set per row, one class per column.
        #[arg(long, value_name = "FILE")]
        labels: PathBuf,
    },
    /// Map parameter recovery across trial counts against the bound.
    IdentifiabilitySweep,
    /// Run the progressive cleaning pipeline on a dataset directory.
    Clean {
        /// Directory holding features.csv and noisy_labels.csv.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
    },
    /// Generate a Gaussian-blob dataset with injected label noise.
    MakeSynthetic,
    /// Re-execute a finished run from its manifest.
    Rerun {
        /// Manifest written by a previous command.
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
    },
}

/// Threads requested on the command line, falling back to the
/// MIXCLEAN_THREADS environment variable; 0 leaves the choice to rayon.
fn resolve_threads(flag: usize) -> usize {
    if flag > 0 {
        return flag;
    }
    std::env::var("MIXCLEAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0)
}

fn dispatch(cli: Cli) -> Result<()> {
    let threads = resolve_threads(cli.threads);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }

    let config: serde_json::Value = match &cli.config {
        Some(path) => io::read_json(path)?,
        None => serde_json::json!({}),
    };

    let ctx = CommandContext {
        seed: cli.seed,
        out_dir: cli.out.clone(),
        quiet: cli.quiet,
    };

    match cli.command {
        Command::DemoNonidentifiability => commands::demo::run(&ctx),
        Command::Fit { labels } => commands::fit::run(&ctx, &labels, config),
        Command::IdentifiabilitySweep => commands::sweep::run(&ctx, config),
        Command::Clean { data } => commands::clean::run(&ctx, &data, config),
        Command::MakeSynthetic => commands::synth::run(&ctx, config),
        Command::Rerun { manifest } => commands::rerun::run(&ctx, &manifest),
    }
}

/// Parse arguments, run the chosen command, and map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
