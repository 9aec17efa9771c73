//! Command-line companion to `subpix-core`: dataset generation, training,
//! refinement, pose evaluation, and offset statistics, wired into
//! reproducible runs.
//!
//! Everything lives in the library so integration tests exercise the same
//! code the binary runs; `main.rs` only parses argv and maps errors to the
//! exit-code contract (0 success, 1 usage or configuration, 2 runtime).

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "subpix",
    version,
    about = "Sub-pixel keypoint refinement workflows on synthetic two-view data"
)]
pub struct Cli {
    /// TOML run configuration; command-line flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-view correspondence dataset.
    GenData(commands::gen_data::GenDataArgs),
    /// Train the refinement network on a dataset.
    Train(commands::train::TrainArgs),
    /// Apply a trained checkpoint to a dataset.
    Refine(commands::refine::RefineArgs),
    /// Estimate per-pair relative poses and summarize the errors.
    Eval(commands::eval::EvalArgs),
    /// Histogram refined offset lengths and orientations.
    OffsetHist(commands::offset_hist::OffsetHistArgs),
}

/// Loads the configuration and dispatches. The echoed canonical
/// configuration and all file outputs are pure functions of the inputs.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::GenData(args) => commands::gen_data::run(config, args),
        Command::Train(args) => commands::train::run(config, args),
        Command::Refine(args) => commands::refine::run(config, args),
        Command::Eval(args) => commands::eval::run(config, args),
        Command::OffsetHist(args) => commands::offset_hist::run(config, args),
    }
}
