use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use snm_core::config::{load_config, parse_engines, Engine, SweepSpec};
use snm_core::sweep::{emit_csv, emit_metadata, metadata_path, run_sweep, write_csv, RowStatus};

/// Outage analysis and simulation for relay-assisted OFDM-SNM.
#[derive(Debug, Parser)]
#[command(name = "snm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form average outage at every configured point.
    Analyze(CommonArgs),
    /// High-SNR asymptotic outage at every configured point.
    Asymptotic(CommonArgs),
    /// Monte Carlo estimate (mc_threshold unless --engine says otherwise).
    Simulate(CommonArgs),
    /// Every engine listed in the config (or --engine) over the full sweep.
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; a `<stem>.meta.csv` companion is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated: closed_form, asymptotic, mc_threshold, mc_exact.
    #[arg(long)]
    engine: Option<String>,
    /// Monte Carlo worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn prepare(args: &CommonArgs, default_engines: Option<Vec<Engine>>) -> Result<SweepSpec, Failure> {
    let mut spec = load_config(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(engines) = default_engines {
        spec.engines = engines;
    }
    if let Some(list) = &args.engine {
        spec.engines = parse_engines(list).map_err(|e| Failure::Config(format!("--engine: {e}")))?;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(Failure::Config("--trials must be at least 1".into()));
        }
        spec.trials = trials;
    }
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        spec.workers = Some(workers);
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (args, defaults) = match &cli.command {
        Command::Analyze(args) => (args, Some(vec![Engine::ClosedForm])),
        Command::Asymptotic(args) => (args, Some(vec![Engine::Asymptotic])),
        Command::Simulate(args) => (args, Some(vec![Engine::McThreshold])),
        Command::Sweep(args) => (args, None),
    };
    let spec = prepare(args, defaults)?;
    if matches!(cli.command, Command::Simulate(_)) && spec.engines.iter().any(|e| !e.is_monte_carlo()) {
        return Err(Failure::Config(
            "simulate only runs mc_threshold or mc_exact engines".into(),
        ));
    }

    let table = run_sweep(&spec);
    for row in &table.rows {
        if let RowStatus::Error(message) = &row.status {
            eprintln!(
                "warning: {}={} engine {}: {message}",
                row.sweep_param, row.sweep_value, row.engine
            );
        }
    }

    match &args.out {
        Some(path) => {
            emit_csv(&table, path).map_err(|e| Failure::Runtime(e.to_string()))?;
            emit_metadata(&table, metadata_path(path)).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&table, &mut lock).map_err(|e| Failure::Runtime(e.to_string()))?;
            lock.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
