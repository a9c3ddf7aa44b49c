//! `ddtrl`: train, discretize, evaluate and analyze differentiable decision
//! trees from the command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 numerical divergence, 4 degenerate model.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddtrl::{CrispError, EnvError, ModelError, TrainError};

/// Bad flags, files or settings. Exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "ddtrl",
    version,
    about = "Differentiable decision trees for reinforcement learning"
)]
struct Cli {
    /// Tool configuration (JSON). Defaults to the built-in configs/default.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy with PPO; writes model.json, curve.csv and manifest.json.
    Train(commands::TrainArgs),
    /// Convert a trained soft tree into a crisp tree (json, txt and dot).
    Discretize(commands::DiscretizeArgs),
    /// Evaluate a soft, MLP or crisp policy; reports mean and std reward.
    Eval(commands::EvalArgs),
    /// Compute the single-node update curves, critical points and summary.
    Analyze(commands::AnalyzeArgs),
    /// Train every (size, seed) cell of an architecture family in parallel.
    Sweep(commands::SweepArgs),
    /// Render a crisp policy as text, Graphviz dot or JSON.
    Export(commands::ExportArgs),
    /// Fit a CART tree on state-action pairs logged from a policy.
    FitDt(commands::FitDtArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    fn model(e: &ModelError) -> Option<u8> {
        matches!(e, ModelError::NonFinite(_)).then_some(3)
    }
    fn env(e: &EnvError) -> Option<u8> {
        matches!(e, EnvError::UnknownEnv(_) | EnvError::InvalidConfig(_)).then_some(2)
    }
    for cause in err.chain() {
        let code = if cause.downcast_ref::<UsageError>().is_some() {
            Some(2)
        } else if let Some(e) = cause.downcast_ref::<TrainError>() {
            match e {
                TrainError::NonFinite(_) => Some(3),
                TrainError::InvalidConfig(_) => Some(2),
                TrainError::Model(m) => model(m),
                TrainError::EnvSetup(v) => env(v),
                _ => None,
            }
        } else if let Some(e) = cause.downcast_ref::<CrispError>() {
            match e {
                CrispError::DegenerateNode { .. } => Some(4),
                CrispError::Model(m) => model(m),
                _ => None,
            }
        } else if let Some(e) = cause.downcast_ref::<ModelError>() {
            model(e)
        } else if let Some(e) = cause.downcast_ref::<EnvError>() {
            env(e)
        } else {
            None
        };
        if let Some(c) = code {
            return c;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = config::ToolConfig::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Train(a) => commands::train(&cfg, a),
        Command::Discretize(a) => commands::discretize(a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Analyze(a) => commands::analyze(&cfg, a),
        Command::Sweep(a) => commands::sweep(&cfg, a),
        Command::Export(a) => commands::export(a),
        Command::FitDt(a) => commands::fit_dt(&cfg, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
