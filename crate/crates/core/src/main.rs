use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tangent::experiments::{self, ExperimentConfig, RunRecord};
use tangent::{Error, Result};

/// Neural tangent kernel experiments: dual activations, random feature
/// schemes, network/kernel equivalence, kernel learning and memorization.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hermite duals of an activation against direct quadrature.
    Duals(Common),
    /// Empirical NTK concentration and the function-approximation rate.
    KernelApprox(Common),
    /// Network SGD vs NTK training as the output scale grows.
    Equivalence(Common),
    /// Excess risk of random-feature SGD against its bound.
    KernelLearning(Common),
    /// Memorization of random labels, with the explicit witness.
    Memorize(Common),
    /// Empirical boundedness constant of each dataset kind.
    Boundedness(Common),
    /// Numerical self-checks.
    Diagnostics(Common),
}

#[derive(Args)]
struct Common {
    /// TOML parameter table, or a run.json to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn load_config(name: &str, path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return ExperimentConfig::default_for(name);
    };
    if path.extension().is_some_and(|e| e == "json") {
        let config = RunRecord::read(path)?.config;
        if config.name() != name {
            return Err(Error::InvalidConfig(format!(
                "{} records a `{}` run, not `{name}`",
                path.display(),
                config.name()
            )));
        }
        return Ok(config);
    }
    ExperimentConfig::from_toml(name, &fs::read_to_string(path)?)
}

fn run(name: &str, common: Common) -> Result<()> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let mut config = load_config(name, common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    let record = experiments::run(&config)?;
    let out = common.out.unwrap_or_else(|| Path::new("runs").join(name));
    record.write(&out)?;

    for (k, v) in &record.metrics {
        println!("{k:<36} {v}");
    }
    for c in &record.checks {
        println!("[{}] {} ({})", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} in {:.1}s", out.display(), record.wall_clock_secs);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match cli.command {
        Command::Duals(c) => ("duals", c),
        Command::KernelApprox(c) => ("kernel-approx", c),
        Command::Equivalence(c) => ("equivalence", c),
        Command::KernelLearning(c) => ("kernel-learning", c),
        Command::Memorize(c) => ("memorize", c),
        Command::Boundedness(c) => ("boundedness", c),
        Command::Diagnostics(c) => ("diagnostics", c),
    };
    match run(name, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
