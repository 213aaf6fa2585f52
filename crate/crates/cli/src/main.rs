//! `warpbench`: batch runner for warped-cone experiments.
//!
//! Exit codes: 0 success, 2 invalid input or a failed stage, 3 a checked
//! property was violated.

mod config;
mod error;
mod instance;
mod pipeline;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Format, Stage, Value};
use error::CliError;
use pipeline::{RunManifest, Status};

#[derive(Parser, Debug)]
#[command(
    name = "warpbench",
    version,
    about = "Warped-cone experiments: metrics, fibred embeddings, spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the stages listed in the config
    Run(Common),
    /// Warped distance matrices and metric axiom checks
    Warp(Common),
    /// Chart atlas and requirement 1/2 checks of the fibred embedding
    EmbedCheck(Common),
    /// R-local affine action and its claims
    Rlocal(Common),
    /// Conditionally negative definite kernel table and form checks
    Cnd(Common),
    /// Spectral gap series and trend
    Gap(Common),
    /// Distortion lower and upper bounds
    Distort(Common),
    /// Tower description and free-orbit level scan
    Towers(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Run a single level instead of the configured list (integer, float or p/q)
    #[arg(long)]
    level: Option<String>,
    /// Scale R; repeat for several
    #[arg(long = "R")]
    radius: Vec<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Replace the configured seeds
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(level) = &self.level {
            config.levels = vec![Value::parse(level)];
        }
        if !self.radius.is_empty() {
            config.radii = self.radius.iter().map(|r| Value::parse(r)).collect();
        }
        if let Some(p) = self.p {
            config.p = p;
        }
        if let Some(seed) = self.seed {
            config.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            config.output = out.clone();
        }
        if let Some(format) = self.format {
            config.format = format;
        }
        config.validate()?;
        Ok(config)
    }
}

fn report(manifest: &RunManifest) {
    for s in &manifest.stages {
        let status = match s.status {
            Status::Ok => "ok",
            Status::Cached => "cached",
            Status::Failed => "failed",
            Status::Violation => "violation",
            Status::Skipped => "skipped",
        };
        eprintln!("{:<12} {status:<9} {:>8.2}s", s.stage.name(), s.seconds);
        if let Some(reason) = &s.reason {
            eprintln!("  {reason}");
        }
        for v in &s.violations {
            eprintln!("  violation: {v}");
        }
    }
}

fn execute(cli: Cli) -> Result<RunManifest, CliError> {
    let (common, stage) = match &cli.command {
        Command::Run(c) => (c, None),
        Command::Warp(c) => (c, Some(Stage::Warp)),
        Command::EmbedCheck(c) => (c, Some(Stage::EmbedCheck)),
        Command::Rlocal(c) => (c, Some(Stage::Rlocal)),
        Command::Cnd(c) => (c, Some(Stage::Cnd)),
        Command::Gap(c) => (c, Some(Stage::Gap)),
        Command::Distort(c) => (c, Some(Stage::Distort)),
        Command::Towers(c) => (c, Some(Stage::Towers)),
    };
    let config = common.load()?;
    let stages = stage.map_or_else(|| config.stages.clone(), |s| vec![s]);
    pipeline::run(&config, &stages)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(manifest) => {
            report(&manifest);
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
