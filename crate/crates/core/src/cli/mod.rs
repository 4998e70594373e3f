//! Command-line experiment runner: configuration files, shipped presets,
//! and deterministic CSV/JSON output.

pub mod config;
pub mod presets;
pub mod runner;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ptsim", version, about = "Process-tensor simulation of open spin systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute the single run or preset described by a config file.
    Run {
        /// TOML configuration file.
        config: PathBuf,
        /// Output directory for CSV/JSON files.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Worker threads (0 = all available cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Cross-check small single-qubit runs against the brute-force
        /// path sum before executing.
        #[arg(long)]
        verify: bool,
    },
    /// Execute the parameter sweep described by a config file.
    Sweep {
        /// TOML configuration file with a [sweep] block.
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Inspect the shipped presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetsAction {
    /// List every preset name with a one-line description.
    List,
}

/// Execute a parsed command line; returns the exit code on failure through
/// [`Error::exit_code`].
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out_dir, workers, verify } => {
            let plan = load_plan(&config)?;
            let files = runner::execute_plan(&plan, &out_dir, workers, verify)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Sweep { config, out_dir, workers } => {
            let plan = load_plan(&config)?;
            if !matches!(plan, runner::Plan::Sweep(_)) {
                return Err(Error::Config(format!(
                    "{} does not describe a sweep (missing [sweep] block)",
                    config.display()
                )));
            }
            let files = runner::execute_plan(&plan, &out_dir, workers, false)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Presets { action: PresetsAction::List } => {
            for (name, description) in presets::list() {
                println!("{name:16} {description}");
            }
            Ok(())
        }
    }
}

fn load_plan(path: &PathBuf) -> Result<runner::Plan> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse_config(&text)?;
    runner::plan_from_config(&cfg)
}
