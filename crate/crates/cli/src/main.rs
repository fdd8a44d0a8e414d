use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use orbitlink::runner::{run, ExperimentConfig, Operation, RunOptions};

/// Periodic-orbit statistics and average linking numbers for symbolic flows.
#[derive(Parser, Debug)]
#[command(name = "orbitlink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Topological pressure of a fixture potential.
    Pressure(RunArgs),
    /// Enumerate prime periodic orbits in a length window.
    Orbits(RunArgs),
    /// Winding-cycle minimiser and the β function.
    Beta(RunArgs),
    /// Homology-class orbit counts against the asymptotic prediction.
    Count(RunArgs),
    /// Equidistribution of orbit measures in a homology class.
    Equidistribute(RunArgs),
    /// Large-deviation rates for orbit averages.
    Ld(RunArgs),
    /// Linking numbers of template knot pairs.
    Link(RunArgs),
    /// Empirical Λ-bound scan of a template curve.
    LambdaScan(RunArgs),
    /// Helicity of an analytic divergence-free field.
    Helicity(RunArgs),
    /// Weighted average linking numbers over orbit windows.
    AverageLink(RunArgs),
    /// Convergence of average linking numbers to the double integral.
    Study(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in fixture, used when no configuration file is given.
    #[arg(long, value_name = "NAME", conflicts_with = "config")]
    fixture: Option<String>,
    /// Output directory (overrides the config and ORBITLINK_OUT).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Seed for the sampled stages (overrides the config).
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Evaluate the config's [[check]] assertions; exit nonzero if any fails.
    #[arg(long)]
    verify: bool,
}

impl Command {
    fn split(self) -> (Operation, RunArgs) {
        match self {
            Command::Pressure(a) => (Operation::Pressure, a),
            Command::Orbits(a) => (Operation::Orbits, a),
            Command::Beta(a) => (Operation::Beta, a),
            Command::Count(a) => (Operation::Count, a),
            Command::Equidistribute(a) => (Operation::Equidistribute, a),
            Command::Ld(a) => (Operation::Ld, a),
            Command::Link(a) => (Operation::Link, a),
            Command::LambdaScan(a) => (Operation::LambdaScan, a),
            Command::Helicity(a) => (Operation::Helicity, a),
            Command::AverageLink(a) => (Operation::AverageLink, a),
            Command::Study(a) => (Operation::Study, a),
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let (op, args) = cli.command.split();
    let config = match (&args.config, &args.fixture) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => ExperimentConfig::new(name, op),
        (None, None) => bail!("either --config or --fixture is required"),
    };
    let opts = RunOptions {
        operation: Some(op),
        out_dir: args.out,
        threads: args.threads,
        seed: args.seed,
        verify: args.verify,
    };
    let report = run(config, &opts).with_context(|| format!("{} failed", op.name()))?;
    let m = &report.manifest;
    for (k, v) in &m.summary {
        println!("{k} = {v}");
    }
    for c in &m.checks {
        println!("check {} = {}: {}", c.quantity, c.value, if c.passed { "PASS" } else { "FAIL" });
    }
    eprintln!("wrote {} files to {}", m.outputs.len() + 1, report.out_dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
