use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use volrisk::Execution;
use volrisk_cli::{run_backtest, run_check_arb, run_decompose, run_fhs, run_synth, CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "volrisk", version, about = "Swaption smile risk: decomposition, FHS VaR, backtests, arbitrage checks")]
struct Cli {
    /// Pipeline config file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cube with known modes.
    Synth(SynthArgs),
    /// Decompose log-returns of a slice into eigenfunctions and projections.
    Decompose(InputArgs),
    /// Forecast projection quantiles and extreme smiles.
    Fhs(InputArgs),
    /// Kupiec and Christoffersen tests of the residual quantile forecasts.
    Backtest(InputArgs),
    /// Check extreme smiles for static arbitrage in price space.
    CheckArb(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Vol cube CSV.
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated returns.
    #[arg(long)]
    dates: Option<usize>,
    #[arg(long)]
    modes: Option<usize>,
    /// Comma-separated eigenvalues.
    #[arg(long)]
    lambdas: Option<String>,
    /// Comma-separated AR(1) coefficients per mode.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long = "vol-cluster")]
    vol_cluster: Option<f64>,
    /// `a:b:n` for a moneyness smile, `a:b:n,c:d:m` for an expiry × tenor surface.
    #[arg(long)]
    grid: Option<String>,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    match &cli.command {
        Command::Synth(a) => {
            let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
            set("seed", a.seed.map(|v| v.to_string()))?;
            set("synth.dates", a.dates.map(|v| v.to_string()))?;
            set("modes", a.modes.map(|v| v.to_string()))?;
            set("synth.lambdas", a.lambdas.clone())?;
            set("synth.beta", a.beta.clone())?;
            set("synth.vol_cluster", a.vol_cluster.map(|v| v.to_string()))?;
            set("synth.grid", a.grid.clone())?;
            if a.lambdas.is_some() && a.modes.is_none() {
                cfg.modes = cfg.synth.lambdas.len();
            }
        }
        Command::Decompose(a) | Command::Fhs(a) | Command::Backtest(a) | Command::CheckArb(a) => {
            if let Some(p) = &a.input {
                cfg.input = Some(p.clone());
            }
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let manifest = match cli.command {
        Command::Synth(_) => run_synth(&cfg)?,
        Command::Decompose(_) => run_decompose(&cfg, exec)?,
        Command::Fhs(_) => run_fhs(&cfg, exec)?,
        Command::Backtest(_) => run_backtest(&cfg, exec)?,
        Command::CheckArb(_) => run_check_arb(&cfg, exec)?,
    };
    log::info!("{} outputs in {}", manifest.outputs.len(), cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
