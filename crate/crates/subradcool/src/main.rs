//! `subradcool run --config <path>` and `subradcool compare <a> <b>`.

mod compare;
mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subradcool_core::ErrorClass;

use crate::output::{Summary, TableInfo};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Schema(String),
    #[error("output: {0}")]
    Io(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{0}")]
    Core(#[from] subradcool_core::Error),
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Schema(_) | RunError::Io(_) | RunError::GridMismatch(_) => 1,
            RunError::Core(e) => match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Numerical => 2,
                ErrorClass::Validity => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "subradcool", version, about = "Collective sideband cooling of dipole-coupled emitter arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a JSON config (or a previous summary.json).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Per-point relative deviations between two run directories.
    Compare { a: PathBuf, b: PathBuf },
}

fn run(config: &Path, out: Option<PathBuf>, threads: Option<usize>, seed_override: Option<u64>) -> Result<PathBuf, RunError> {
    let mut cfg = config::load(config)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("subradcool-out"));
    cfg.output.dir = Some(dir.clone());
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| RunError::Schema(format!("threads: {e}")))?;
    }
    let outcome = run::execute(&cfg)?;
    std::fs::create_dir_all(&dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    let name = run::experiment_name(&cfg.experiment);
    for t in &outcome.tables {
        t.write(&dir, name)?;
    }
    let summary = Summary {
        subradcool_version: env!("CARGO_PKG_VERSION").into(),
        experiment: name.into(),
        atoms: outcome.atoms,
        tables: outcome.tables.iter().map(|t| TableInfo { file: format!("{}.csv", t.name), columns: t.columns.clone(), grid_columns: t.grid_columns }).collect(),
        results: outcome.results,
        warnings: outcome.warnings,
        config: cfg,
    };
    summary.write(&dir)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads, seed_override } => run(&config, out, threads, seed_override).map(|dir| println!("{}", dir.display())),
        Command::Compare { a, b } => compare::compare(&a, &b).map(|r| print!("{}", r.render())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
