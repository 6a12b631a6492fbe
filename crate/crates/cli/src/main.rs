use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epf_cli::{stages, ConfigError, Preset, Run, RunConfig};

#[derive(Parser)]
#[command(name = "epf", version, about = "Forecast pool, battery backtest and forecast-value analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value = "desk")]
    preset: Preset,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the market dataset (synthetic or loaded from CSV).
    Synth,
    /// Forecast every pool member over the evaluation period.
    Forecast,
    /// Backtest each battery against every member and the oracle.
    Backtest,
    /// Statistical metrics per member.
    Evaluate,
    /// Metric-profit correlations and yearly profit statistics.
    Correlate,
    /// Every stage in order.
    All,
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(cli.preset, path)?,
        None => RunConfig::load(cli.preset, None)?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let run = Run::new(cfg, &cli.out);
    match cli.command {
        Command::Synth => stages::cmd_synth(&run),
        Command::Forecast => stages::cmd_forecast(&run),
        Command::Backtest => stages::cmd_backtest(&run),
        Command::Evaluate => stages::cmd_evaluate(&run),
        Command::Correlate => stages::cmd_correlate(&run),
        Command::All => stages::cmd_all(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
