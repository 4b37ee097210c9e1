//! `qnnbench`: prepare data, train, attack, adversarially retrain and report.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use qnn_bench::experiment::Profile;

use config::{RunConfig, TaskKind};

#[derive(Parser)]
#[command(
    name = "qnnbench",
    version,
    about = "Adversarial robustness benchmark for quantum classifiers"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_profile)]
    profile: Option<Profile>,
    #[arg(long, global = true, value_enum)]
    task: Option<TaskKind>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and cache the train/test split.
    Prepare {
        /// Generated Q/T glyphs instead of EMNIST files.
        #[arg(long)]
        synthetic: bool,
        /// Directory with the EMNIST-letters IDX files.
        #[arg(long)]
        emnist_dir: Option<PathBuf>,
    },
    /// Clean training; writes the best checkpoint and the epoch history.
    Train {
        /// Continue from the saved training state.
        #[arg(long)]
        resume: bool,
    },
    /// Mask FGSM sweep and the adversarial training set.
    Attack,
    /// Mixed-batch training warm-started from the clean model.
    TrainAdv,
    /// Sensitivity, robustness bounds and comparisons.
    Report {
        /// Finished fnn run to compare against (emnist only).
        #[arg(long)]
        fnn: Option<PathBuf>,
    },
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    match s {
        "paper-20q" => Ok(Profile::Paper20q),
        "desk-12q" => Ok(Profile::Desk12q),
        _ => Err(format!(
            "unknown profile {s:?}; expected paper-20q or desk-12q"
        )),
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.profile {
        cfg.profile = p;
    }
    if let Some(t) = cli.task {
        cfg.task = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    match &cli.command {
        Command::Prepare {
            synthetic,
            emnist_dir,
        } => {
            cfg.data.synthetic |= synthetic;
            if let Some(d) = emnist_dir {
                cfg.data.emnist_dir = d.clone();
            }
        }
        Command::Report { fnn: Some(f) } => cfg.report.fnn_artifacts = Some(f.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Prepare { .. } => commands::prepare(&cfg),
        Command::Train { resume } => commands::train(&cfg, resume),
        Command::Attack => commands::attack(&cfg),
        Command::TrainAdv => commands::train_adv(&cfg),
        Command::Report { .. } => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
