//! `sde`: spectral analysis, enhancement, schedules, gradient checks and
//! training runs from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sde_core::io::MatrixFormat;
use sde_core::{Result, RNG_ALGORITHM, VERSION};

mod commands;
mod config;
mod manifest;
mod svg;

use commands::{ablate, analyze, enhance, gradcheck, schedules, train, Context, Outcome};
use manifest::{now_ms, RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "sde", version, about = "Spectral disentanglement and enhancement toolkit")]
struct Cli {
    /// Run seed; overrides the config's top-level `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "sde-out")]
    out: PathBuf,
    /// JSON config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Format of matrix outputs.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Singular spectrum, subspace partition and energy report of a matrix.
    Analyze(analyze::AnalyzeArgs),
    /// Applies one spectral enhancement to a matrix.
    Enhance(enhance::EnhanceArgs),
    /// Tabulates and plots the alpha and lambda schedules.
    Schedules(schedules::SchedulesArgs),
    /// Compares analytic gradients with finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Trains one model on the synthetic retrieval task.
    Train(train::TrainArgs),
    /// Runs the mode by seed ablation grid.
    Ablate(ablate::AblateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Enhance(_) => "enhance",
            Command::Schedules(_) => "schedules",
            Command::Gradcheck(_) => "gradcheck",
            Command::Train(_) => "train",
            Command::Ablate(_) => "ablate",
        }
    }

    /// The seed the command consumed; the ablation grid carries its own list.
    fn seed_used(&self, ctx: &Context) -> Option<u64> {
        match self {
            Command::Enhance(_) | Command::Gradcheck(_) => Some(ctx.seed()),
            Command::Train(_) => Some(ctx.config.train.seed),
            Command::Analyze(_) | Command::Schedules(_) | Command::Ablate(_) => None,
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let started = now_ms();
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match &cli.command {
        Command::Analyze(a) => a.apply(&mut cfg),
        Command::Enhance(a) => a.apply(&mut cfg),
        Command::Schedules(a) => a.apply(&mut cfg),
        Command::Gradcheck(a) => a.apply(&mut cfg),
        Command::Train(a) => a.apply(&mut cfg),
        Command::Ablate(a) => a.apply(&mut cfg),
    }
    let format = match cli.format {
        FormatArg::Csv => MatrixFormat::Csv,
        FormatArg::Bin => MatrixFormat::Binary,
    };
    let mut ctx = Context::new(cli.out.clone(), format, cfg)?;
    let outcome = match &cli.command {
        Command::Analyze(a) => analyze::run(&mut ctx, a)?,
        Command::Enhance(a) => enhance::run(&mut ctx, a)?,
        Command::Schedules(a) => schedules::run(&mut ctx, a)?,
        Command::Gradcheck(a) => gradcheck::run(&mut ctx, a)?,
        Command::Train(a) => train::run(&mut ctx, a)?,
        Command::Ablate(a) => ablate::run(&mut ctx, a)?,
    };
    let manifest = RunManifest {
        command: cli.command.name().into(),
        version: VERSION.into(),
        rng_algorithm: RNG_ALGORITHM.into(),
        seed: cli.command.seed_used(&ctx),
        config: ctx.config.clone(),
        artifacts: ctx.artifacts().to_vec(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    };
    commands::write_file(&ctx.path(MANIFEST_FILE), (manifest.to_json() + "\n").as_bytes())?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
