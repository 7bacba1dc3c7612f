//! Command-line front end of `tunnelsim`: a JSON run configuration goes in,
//! a directory of CSV/JSON artifacts plus a manifest comes out.

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::Parser;
use serde_json::Value;
use thiserror::Error;

use config::{apply_override, load_document, parse, Command, RunConfig};
use output::{ArtifactDir, Warning};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for numerical failures.
    /// The diagnostic without its category prefix.
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tunnelsim", version, about = "Trotterized tunneling on a tight-binding chain")]
pub struct Args {
    /// spectrum, effective-ham, defect, semiclassics, portrait, overlap-map, rabi, sweep, noise or validate.
    /// Falls back to the `command` field of the config.
    pub command: Option<String>,
    /// JSON config, or the manifest of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set plan.dt=0.25` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub enum Outcome {
    Ran { dir: PathBuf, warnings: Vec<Warning> },
    Validated(validate::Diagnostics),
}

/// Config file, then `--set` overrides, then the dedicated flags.
pub fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let base = match &args.config {
        Some(p) => parse(load_document(p)?)?,
        None => RunConfig::default(),
    };
    let mut doc: Value = serde_json::to_value(&base).expect("config serializes");
    for o in &args.overrides {
        apply_override(&mut doc, o)?;
    }
    let mut cfg = parse(doc)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

pub fn execute(args: &Args) -> Result<Outcome, CliError> {
    let mut cfg = resolve(args)?;
    let validate_only = args.command.as_deref() == Some("validate");
    if let Some(name) = args.command.as_deref().filter(|_| !validate_only) {
        cfg.command = Some(Command::parse(name).ok_or_else(|| CliError::Config(format!("unknown command `{name}`")))?);
    }
    let diag = validate::validate(&cfg, cfg.command);
    if validate_only {
        return Ok(Outcome::Validated(diag));
    }
    let command = cfg.command.ok_or_else(|| CliError::Config("no command given on the command line or in the config".into()))?;
    if let Some(e) = diag.errors.first() {
        return Err(CliError::Config(e.clone()));
    }
    let mut out = ArtifactDir::create(&cfg.output_dir)?;
    for w in diag.warnings.iter().chain(&diag.advisories) {
        out.warn(&w.kind, w.message.clone());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    pool.install(|| commands::dispatch(command, &cfg, &mut out))?;
    let warnings = out.finish(&cfg)?;
    Ok(Outcome::Ran { dir: cfg.output_dir.clone(), warnings })
}

/// Runs the CLI and returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    match execute(&args) {
        Ok(Outcome::Ran { dir, warnings }) => {
            for w in &warnings {
                eprintln!("warning [{}]: {}", w.kind, w.message);
            }
            println!("{}", dir.display());
            0
        }
        Ok(Outcome::Validated(d)) => {
            println!("{}", serde_json::to_string_pretty(&d).expect("diagnostics serialize"));
            if d.ok() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
