//! `m3`: fixtures, training, evaluation, transfer, ablations and reports for
//! the logit-sequence quality predictor.
//!
//! Exit codes: 0 on success, 1 when the work itself fails (invalid
//! configuration, undefined metric, failed gradient check), 2 on usage errors.
//! Progress goes to stderr (`RUST_LOG` adjusts the level); artifacts go to
//! the run directory and machine-readable results to stdout.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// A mistake in how the command was invoked, as opposed to a failure of the
/// work it asked for.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "m3", version, about = "Quality prediction from language-model logit sequences")]
pub struct Cli {
    /// Seed for every random stream (initialization, shuffling, splits, synthetic data)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for batch work; 1 runs sequentially
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Configuration: a preset (default, tiny, synthetic) or a JSON/TOML file
    #[arg(long, global = true, value_name = "PRESET|FILE")]
    pub config: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: fixtures plus manifest
    GenFixtures(commands::GenFixtures),
    /// Train a predictor on a dataset manifest and score its test split
    Train(commands::Train),
    /// Score a trained run's checkpoint on a dataset
    Eval(commands::Eval),
    /// Zero-shot transfer to another dataset, optionally retraining on it
    CrossEval(commands::CrossEval),
    /// Train one predictor per variant on a shared split and tabulate them
    Ablate(commands::Ablate),
    /// Compare analytic and finite-difference gradients
    Gradcheck(commands::Gradcheck),
    /// Print parameter counts per component
    Params(commands::Params),
    /// Print a conversation template filled with a prompt
    RenderPrompt(commands::RenderPrompt),
    /// Scatter data, fit plot and summary table for finished runs
    Report(commands::Report),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_secs()
        .init();
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("error: {u}\n\nFor more information, try '--help'.");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
