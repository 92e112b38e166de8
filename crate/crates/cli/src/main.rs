//! `affect`: one executable for the full two-track workflow. `synth` writes
//! a labeled corpus TSV, `train` fits either track and saves a model bundle,
//! `evaluate` scores a bundle against labeled data, and `predict` emits the
//! submission file for a track.
//!
//! Configuration is one flat key-value namespace (see `config`). Precedence,
//! lowest to highest: built-in defaults, the `--config` file, `--set`
//! overrides in the order given, then the named flags below.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors. Every failure prints a single diagnostic line to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "affect", version, about = "Two-track affect modeling workflow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus TSV
    Synth(ConfigArgs),
    /// Train a model and save the bundle, snapshot, and training logs
    Train(ConfigArgs),
    /// Score a model bundle against labeled data and write the report
    Evaluate(ConfigArgs),
    /// Write submission-format predictions for a dataset
    Predict(ConfigArgs),
}

/// Flags shared by every subcommand; each command reads the keys it needs.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file applied before any flags
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one config key (KEY=VALUE, repeatable, applied in order)
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Task to operate on: track1 or track2
    #[arg(long)]
    task: Option<String>,

    /// Input corpus TSV
    #[arg(long)]
    data: Option<PathBuf>,

    /// Auxiliary corpus TSV for staged generation training (track2)
    #[arg(long)]
    aux: Option<PathBuf>,

    /// Model bundle directory written by train
    #[arg(long)]
    model_dir: Option<PathBuf>,

    /// Output path: TSV for synth, bundle dir for train, results dir for
    /// evaluate, submission file for predict
    #[arg(long)]
    out: Option<PathBuf>,

    /// Column mapping file for reading corpus TSVs
    #[arg(long)]
    schema: Option<PathBuf>,

    /// Record count for synth
    #[arg(long)]
    n: Option<usize>,

    /// Base random seed for the run
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for batch prediction
    #[arg(long)]
    workers: Option<usize>,

    /// Regressor kind for track1: mlp, svr, adaboost, or gbt
    #[arg(long)]
    regressor: Option<String>,

    /// Emotion model for track2 train: generation or classifier
    #[arg(long)]
    model: Option<String>,

    /// Classifier loss for track2: softmax_ce or per_label_bce
    #[arg(long)]
    loss_mode: Option<String>,

    /// Learning rate for the transformer fine-tuning stages
    #[arg(long)]
    lr: Option<f64>,

    /// Fine-tuning epochs (track1 encoders, track2 main stage)
    #[arg(long)]
    epochs: Option<usize>,
}

fn resolve(args: &ConfigArgs) -> affect_core::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    for pair in &args.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            affect_core::Error::Config(format!("--set expects KEY=VALUE, got {pair:?}"))
        })?;
        cfg.apply(key.trim(), value.trim())?;
    }
    if let Some(v) = &args.task {
        cfg.apply("task", v)?;
    }
    if let Some(p) = &args.data {
        cfg.data = Some(p.clone());
    }
    if let Some(p) = &args.aux {
        cfg.aux = Some(p.clone());
    }
    if let Some(p) = &args.model_dir {
        cfg.model_dir = Some(p.clone());
    }
    if let Some(p) = &args.out {
        cfg.out = Some(p.clone());
    }
    if let Some(p) = &args.schema {
        cfg.schema = Some(p.clone());
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = &args.regressor {
        cfg.apply("regressor", v)?;
    }
    if let Some(v) = &args.model {
        cfg.apply("model", v)?;
    }
    if let Some(v) = &args.loss_mode {
        cfg.apply("loss_mode", v)?;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    Ok(cfg)
}

/// Collapses a possibly multi-line error into the one-line stderr diagnostic.
fn one_line(e: &affect_core::Error) -> String {
    e.to_string()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
}

fn dispatch(cli: Cli) -> affect_core::Result<()> {
    match cli.command {
        Command::Synth(args) => commands::synth(&resolve(&args)?),
        Command::Train(args) => commands::train(&resolve(&args)?),
        Command::Evaluate(args) => commands::evaluate(&resolve(&args)?),
        Command::Predict(args) => commands::predict(&resolve(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("error: invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(if e.is_data() { 2 } else { 1 })
        }
    }
}
