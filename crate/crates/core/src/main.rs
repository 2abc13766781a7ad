use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use kuramoto_cl::experiments::{
    resolve_config, run, BifurcateConfig, ConvergenceConfig, InstabilityConfig, PermutationConfig, Report, Scenario,
    SelfConsistencyConfig, SimulateConfig,
};
use kuramoto_cl::Result;

/// Kuramoto oscillators on uniform graphs and their continuum limit.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// JSON config file, or a manifest written by an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "KURAMOTO_CL_THREADS")]
    threads: Option<usize>,

    /// Config override `key=value`, dotted keys for nested fields
    /// (e.g. `model.k=0.7`). Values are parsed as JSON when possible.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// C(pK/a) curve of the linear frequency function.
    Selfconsistency,
    /// One network run with steady-state observables.
    Simulate,
    /// Sweep of K comparing simulated and predicted phase gaps.
    Bifurcate,
    /// Distance to a fine continuum reference for growing n.
    Convergence,
    /// Deviation of sorted samples from their quantile targets.
    Permutation,
    /// Escape from a perturbed stationary family.
    Instability,
}

fn execute<S: Scenario>(cli: &Cli) -> Result<Option<Report>> {
    let file = match &cli.config {
        Some(path) => Some(serde_json::from_reader::<_, Value>(std::io::BufReader::new(
            std::fs::File::open(path)?,
        ))?),
        None => None,
    };
    let cfg: S = resolve_config(file, &cli.overrides, cli.seed)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(None);
    }
    run(&cfg, &cli.out_dir).map(Some)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Selfconsistency => execute::<SelfConsistencyConfig>(&cli),
        Command::Simulate => execute::<SimulateConfig>(&cli),
        Command::Bifurcate => execute::<BifurcateConfig>(&cli),
        Command::Convergence => execute::<ConvergenceConfig>(&cli),
        Command::Permutation => execute::<PermutationConfig>(&cli),
        Command::Instability => execute::<InstabilityConfig>(&cli),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            for p in &report.summary.predicates {
                println!("{} {}: {}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
            }
            println!("outputs written to {}", cli.out_dir.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed predicates: {}", report.summary.failed.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
