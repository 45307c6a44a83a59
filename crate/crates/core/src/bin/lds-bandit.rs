use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lds_bandit::harness::experiment::run_experiment_on;
use lds_bandit::harness::{build_scenario, run_diagnostics, write_artifacts, write_diagnostics_csv};
use lds_bandit::trading::build_trading_system;
use lds_bandit::{ContinuousMarketSpec, ExperimentConfig, PolicyKind, Result, RngSeed};

#[derive(Parser)]
#[command(name = "lds-bandit", version, about = "Bandit experiments on latent linear dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write curves, plots and metadata.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<PolicyKind>>,
    },
    /// Scenario utilities.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Empirical regret-bound diagnostic of SB-ETC, one row per run and arm.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write the constructed trading system as JSON.
    Export {
        #[arg(long)]
        out: PathBuf,
        /// Market parameters as JSON; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn load(config: &Path, o: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(runs) = o.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = o.seed {
        cfg.seed = RngSeed(seed);
    }
    if let Some(h) = o.horizon {
        cfg.horizon = Some(h);
    }
    if let Some(out) = o.out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, policies } => {
            let mut cfg = load(&config, overrides)?;
            if let Some(p) = policies {
                cfg.policies = p;
            }
            let scenario = build_scenario(&cfg.scenario)?;
            let result = run_experiment_on(&cfg, &scenario)?;
            for path in write_artifacts(&cfg, &scenario, &result)? {
                println!("{}", path.display());
            }
            for c in &result.curves {
                eprintln!("{:>7}: mean cumulative regret {:.3}", c.policy, c.cum_mean.last().copied().unwrap_or(0.0));
            }
        }
        Command::Scenario { command: ScenarioCommand::Export { out, spec } } => {
            let spec = match spec {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => ContinuousMarketSpec::default(),
            };
            let system = build_trading_system(&spec)?;
            std::fs::write(&out, system.to_json()? + "\n")?;
            println!("{}", out.display());
        }
        Command::Diagnose { config, overrides } => {
            let cfg = load(&config, overrides)?;
            let scenario = build_scenario(&cfg.scenario)?;
            let runs = run_diagnostics(&cfg, &scenario)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("diagnostic.csv");
            let mut buf = Vec::new();
            write_diagnostics_csv(&runs, &mut buf)?;
            std::fs::write(&path, buf)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
