use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ris_kinematics::channel::Regime;
use ris_kinematics::fim::AnalyticDerivatives;
use ris_kinematics::harness::output::{config_hash, write_bounds_csv, write_experiment, write_fraunhofer_csv, Manifest};
use ris_kinematics::harness::sweep::{run_fraunhofer_curve, run_scenario1_sweep, run_scenario2_sweep};
use ris_kinematics::harness::validate::run_validation_suite;
use ris_kinematics::harness::{ExperimentConfig, HarnessError};

/// Error bounds for wrist-worn RIS orientation and position sensing.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// run a single seed instead of the configured list
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// directory for `<experiment>.csv` and its manifest; CSV goes to stdout otherwise
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// propagation model, `near` or `far`
    #[arg(long, global = true, value_name = "near|far")]
    regime: Option<Regime>,
    /// worker threads (default: one per core)
    #[arg(long, global = true, value_name = "K")]
    parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fraunhofer distance against sensor size and carrier
    Fraunhofer,
    /// orientation bounds at known sensor positions
    Scenario1,
    /// joint position and orientation bounds
    Scenario2,
    /// derivative, code, regime and structural self-checks
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fraunhofer => "fraunhofer",
            Command::Scenario1 => "scenario1",
            Command::Scenario2 => "scenario2",
            Command::Validate => "validate",
        }
    }
}

enum Failure {
    Config(String),
    Run(String),
    Validation,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Code(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seeds = vec![seed];
    }
    if let Some(regime) = common.regime {
        config.regime = regime;
    }
    config.validate()?;
    Ok(config)
}

fn emit(common: &Common, experiment: &str, config: &ExperimentConfig, csv: Vec<u8>, rows: usize, started: Instant) -> Result<(), Failure> {
    match &common.out {
        Some(dir) => {
            let manifest = Manifest::new(experiment, config, rows, started.elapsed().as_secs_f64());
            let (csv_path, _) = write_experiment(dir, &csv, &manifest)?;
            eprintln!("{experiment}: {rows} rows -> {}", csv_path.display());
        }
        None => std::io::stdout()
            .write_all(&csv)
            .map_err(|e| Failure::Run(e.to_string()))?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let common = &cli.common;
    let config = load_config(common)?;
    let started = Instant::now();
    let experiment = cli.command.name();
    match cli.command {
        Command::Fraunhofer => {
            let rows = run_fraunhofer_curve(&config)?;
            let mut csv = Vec::new();
            write_fraunhofer_csv(&mut csv, &rows)?;
            emit(common, experiment, &config, csv, rows.len(), started)
        }
        Command::Scenario1 | Command::Scenario2 => {
            let rows = if matches!(cli.command, Command::Scenario1) {
                run_scenario1_sweep(&config)?
            } else {
                run_scenario2_sweep(&config)?
            };
            let flagged = rows.iter().filter(|r| !r.receiver_in_near_field).count();
            if flagged > 0 && config.regime == Regime::Near {
                eprintln!("warning: {flagged} rows have the receiver beyond the Fraunhofer distance");
            }
            let mut csv = Vec::new();
            write_bounds_csv(&mut csv, experiment, &config_hash(&config), &rows)?;
            emit(common, experiment, &config, csv, rows.len(), started)
        }
        Command::Validate => {
            let report = run_validation_suite(&config, &AnalyticDerivatives);
            println!("{report}");
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Run(e.to_string()))?;
                std::fs::write(dir.join("validate.txt"), format!("{report}\n"))
                    .map_err(|e| Failure::Run(e.to_string()))?;
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match cli.common.parallel {
        Some(0) => {
            eprintln!("error: --parallel must be at least 1");
            return ExitCode::from(2);
        }
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
