//! `decoh`: propagation, closed-loop optimization, spectra, perturbation
//! sweeps and reference reproductions from the command line.

mod config;
mod manifest;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::*;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_REPRODUCTION: i32 = 4;

#[derive(Debug)]
pub enum Failure {
    Core(decoh_core::Error),
    Config(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(decoh_core::Error::Diverged { .. }) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl From<decoh_core::Error> for Failure {
    fn from(e: decoh_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

#[derive(Parser)]
#[command(name = "decoh", version, about = "Closed-loop control of multilevel quantum systems under decoherence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct Output {
    /// Output directory (default: a new directory under $DECOH_OUTPUT_ROOT or ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the master equation and write the trajectory.
    Propagate(PropagateConfig),
    /// Search for a field that drives the target yield.
    Optimize(OptimizeConfig),
    /// Power spectrum of a saved field.
    Spectrum(SpectrumConfig),
    /// Rerun a reference table or figure and compare.
    Reproduce(ReproduceConfig),
    /// Perturbative yields against the exact oracle over a lambda sweep.
    PerturbSweep(SweepConfig),
    /// Built-in model systems.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Execute a TOML run file (`command = "..."` plus that command's keys).
    Run { file: PathBuf },
    /// Replay the configuration recorded in a manifest.
    Rerun { manifest: PathBuf },
}

#[derive(Subcommand)]
enum ModelAction {
    /// Write a model as a TOML system file.
    Export(ExportConfig),
}

fn resolve(command: Command) -> Result<RunConfig, Failure> {
    let mut cfg = match command {
        Command::Propagate(c) => RunConfig::Propagate(c),
        Command::Optimize(c) => RunConfig::Optimize(c),
        Command::Spectrum(c) => RunConfig::Spectrum(c),
        Command::Reproduce(c) => RunConfig::Reproduce(c),
        Command::PerturbSweep(c) => RunConfig::PerturbSweep(c),
        Command::Model { action: ModelAction::Export(c) } => RunConfig::ModelExport(c),
        Command::Run { file } => RunConfig::load(&file)?,
        Command::Rerun { manifest } => manifest::Manifest::load(&manifest)?.config,
    };
    cfg.absolutize()?;
    Ok(cfg)
}

fn main_inner(command: Command, output: Output) -> Result<i32, Failure> {
    let cfg = resolve(command)?;
    let dir = manifest::output_dir(output.out.as_deref(), cfg.kind())?;
    let start = Instant::now();
    match run::execute(&cfg, &dir) {
        Ok(done) => {
            manifest::write(&dir, &cfg, &done.outputs, start.elapsed(), done.code)?;
            eprintln!("outputs in {}", dir.display());
            Ok(done.code)
        }
        Err(e) => {
            manifest::write(&dir, &cfg, &[], start.elapsed(), e.exit_code())?;
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli.command, cli.output) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
