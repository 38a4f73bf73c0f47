use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use landau_core::{run_experiment, ExperimentConfig, ExperimentKind};
use serde_json::Value;

/// Numerical experiments for Landau damping on an expanding torus.
#[derive(Parser)]
#[command(name = "expanding-landau", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Penrose stability margin and dielectric boundary traces.
    Penrose(RunArgs),
    /// Resolvent table, route comparison and envelope fit.
    Resolvent(RunArgs),
    /// Liouville-Green error budget against a reference solution.
    LgVerify(RunArgs),
    /// Free-streaming or linearized kinetic run with decay fit.
    LinearDecay(RunArgs),
    /// Fully nonlinear kinetic run.
    NonlinearSim(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). The "experiment" key may be omitted.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides "out_dir" from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks; overrides "seed" from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 2 when the summary reports "pass": false.
    #[arg(long)]
    strict: bool,
}

fn load(kind: ExperimentKind, args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    let Some(obj) = value.as_object_mut() else { bail!("config must be a JSON object") };
    let name = serde_json::to_value(kind)?;
    match obj.get("experiment") {
        None => {
            obj.insert("experiment".into(), name);
        }
        Some(v) if *v == name => {}
        Some(v) => bail!("config is for experiment {v}, but the subcommand is {name}"),
    }
    if let Some(out) = &args.out {
        obj.insert("out_dir".into(), Value::String(out.to_string_lossy().into_owned()));
    }
    if let Some(seed) = args.seed {
        obj.insert("seed".into(), seed.into());
    }
    Ok(ExperimentConfig::from_value(value)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (kind, args) = match &cli.command {
        Command::Penrose(a) => (ExperimentKind::Penrose, a),
        Command::Resolvent(a) => (ExperimentKind::Resolvent, a),
        Command::LgVerify(a) => (ExperimentKind::LgVerify, a),
        Command::LinearDecay(a) => (ExperimentKind::LinearDecay, a),
        Command::NonlinearSim(a) => (ExperimentKind::NonlinearSim, a),
    };
    let cfg = load(kind, args)?;
    let outcome = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
    eprintln!("{}: pass = {}, artifacts in {}", kind.name(), outcome.pass, outcome.out_dir.display());
    Ok(outcome.pass || !args.strict)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
