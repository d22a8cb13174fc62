use clap::{Args, Parser, Subcommand};
use mcn_sim::config::{parse_config, Kind, ScenarioConfig};
use mcn_sim::scenario::{run_scenario, RunError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulator for molecular communication networks: diffusion channels,
/// receptor-limited reception, multihop relaying, and consensus over
/// colonies of engineered bacteria.
#[derive(Debug, Parser)]
#[command(name = "mcn-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate point-source responses (step and steady state).
    Diffusion(RunArgs),
    /// Mutual information and capacity of the receptor reading channel.
    AgentCapacity(RunArgs),
    /// Multihop relay error, analytic and Monte Carlo.
    Relay(RunArgs),
    /// Distributed averaging: variance trajectories and spectral gap.
    Consensus(RunArgs),
    /// Run a swept scenario described by the config's sweep section.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the scenario TOML.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides MCN_SIM_OUT and the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's Monte Carlo trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads for Monte Carlo fan-out (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Diffusion(args) => (Kind::Diffusion, args),
        Command::AgentCapacity(args) => (Kind::AgentCapacity, args),
        Command::Relay(args) => (Kind::Relay, args),
        Command::Consensus(args) => (Kind::Consensus, args),
        Command::Sweep(args) => (Kind::Sweep, args),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mcn-sim: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(kind: Kind, args: &RunArgs) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config: ScenarioConfig = parse_config(&text)?;
    if config.kind != kind {
        return Err(mcn_sim::config::ConfigError::Validation(format!(
            "kind: config says \"{}\" but the subcommand is \"{}\"",
            config.kind.as_str(),
            kind.as_str()
        ))
        .into());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }

    let out_dir = resolve_out_dir(args, &config);
    let artifacts = match args.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            pool.install(|| run_scenario(&config, &out_dir))?
        }
        None => run_scenario(&config, &out_dir)?,
    };
    println!(
        "wrote {} rows to {} (manifest: {})",
        artifacts.rows,
        artifacts.csv_path.display(),
        artifacts.manifest_path.display()
    );
    Ok(())
}

fn resolve_out_dir(args: &RunArgs, config: &ScenarioConfig) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Ok(out) = std::env::var("MCN_SIM_OUT") {
        if !out.is_empty() {
            return PathBuf::from(out);
        }
    }
    if let Some(out) = &config.out {
        return PathBuf::from(out);
    }
    PathBuf::from("mcn-out")
}
