//! Batch front-end: preprocess -> fit -> simulate -> diagnose -> compare.
//!
//! Every command is a pure function of (config, inputs, seed); outputs
//! are written atomically so reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 internal
//! inconsistency.

mod commands;
mod config;
mod io_util;
mod model_doc;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "qrh",
    about = "Queue-reactive Hawkes order-book toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a Level-I session, classify events and write segment,
    /// event, grid and summary files.
    Preprocess {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model and write its JSON document plus a fit report.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// One of: qr, hawkes, qrh1, qrh2-mle, qrh2-ls, hawkes8.
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a fitted model by thinning.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Path to a fitted model JSON document.
        #[arg(long)]
        model: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual, conditional-intensity and state-factor diagnostics of a
    /// fitted model against the configured dataset.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Information criteria and likelihood-ratio tests across fitted
    /// models of the same family.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fitted model JSON documents.
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
}

fn load_config(path: &PathBuf, out: Option<PathBuf>) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(dir) = out {
        config.out_dir = dir;
    }
    Ok(config)
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap already formats the message; surface it as an input error.
        anyhow::anyhow!("{e}")
    })?;
    match cli.command {
        Command::Preprocess { config, out } => {
            commands::cmd_preprocess(&load_config(&config, out)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { config, model, out } => {
            let converged = commands::cmd_fit(&load_config(&config, out)?, &model)?;
            if converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("fit did not converge; best iterate saved");
                Ok(ExitCode::from(2))
            }
        }
        Command::Simulate {
            config,
            model,
            seed,
            out,
        } => {
            commands::cmd_simulate(&load_config(&config, out)?, &model, seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose { config, model, out } => {
            commands::cmd_diagnose(&load_config(&config, out)?, &model)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            config,
            out,
            models,
        } => {
            commands::cmd_compare(&load_config(&config, out)?, &models)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let internal = err.chain().any(|c| {
                matches!(
                    c.downcast_ref::<qrh_core::Error>(),
                    Some(qrh_core::Error::Internal(_))
                )
            });
            if internal {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
