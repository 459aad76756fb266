//! `noonphase`: runs measurement-scheme experiments from a JSON config and
//! writes plot-ready CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod commands;
mod config;
mod error;

use config::{Command, ExperimentConfig, Overrides, Recipe};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "noonphase", version, about = "NOON-state phase estimation experiments")]
struct Args {
    /// Command to run; may instead be given in the config file.
    command: Option<Command>,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Predefined experiment, appended to the config's own entries.
    #[arg(long, value_parser = parse_recipe)]
    recipe: Option<Recipe>,
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per scheme, overriding the per-kind defaults.
    #[arg(long)]
    samples: Option<u64>,
    /// Output file; stdout when omitted. The resolved config goes to `<out>.config.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_recipe(s: &str) -> Result<Recipe, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown recipe `{s}`"))
}

fn execute(args: Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(r) = args.recipe {
        if cfg.recipe.is_some_and(|c| c != r) {
            return Err(CliError::Config("config already names a different recipe".into()));
        }
        cfg.recipe = Some(r);
    }
    let cfg = cfg.resolve(Overrides {
        command: args.command,
        seed: args.seed,
        samples: args.samples,
        out: args.out,
    })?;
    commands::run(&cfg)
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noonphase: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
