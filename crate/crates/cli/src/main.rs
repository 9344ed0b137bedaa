//! Command-line entry point.
//!
//! Exit codes: 0 on success (including `--help`/`--version`), 1 for
//! validation and usage errors, 2 for I/O errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use commands::DataSource;
use config::RunConfig;
use rankcast::Error;

#[derive(Parser)]
#[command(
    name = "rankcast",
    version,
    about = "Rank-probability forecasting and trend-reversion backtesting on daily closes"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic market and write prices.csv + universe.csv
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: SynthFlags,
    },
    /// Write per-period quintile probability forecasts (forecasts.csv)
    Forecast {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Score forecasters against realized quintiles (outcomes.csv, score_report.json)
    Score {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run portfolio backtests (weights_<strategy>.csv, backtest_report.json)
    Backtest {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; individual flags override its fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthFlags {
    /// RNG seed for the synthetic market
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_stocks: Option<usize>,
    #[arg(long)]
    n_etfs: Option<usize>,
    #[arg(long)]
    n_days: Option<usize>,
    #[arg(long)]
    stock_vol: Option<f64>,
    #[arg(long)]
    etf_vol: Option<f64>,
    #[arg(long)]
    stock_drift: Option<f64>,
    #[arg(long)]
    etf_drift: Option<f64>,
    /// Append one high-volatility decaying ETF to the universe
    #[arg(long, action = ArgAction::SetTrue)]
    include_vxx_like: bool,
}

#[derive(Args)]
struct RunFlags {
    /// Long-format close CSV (date,asset_id,close); omit together with
    /// --universe to run on the synthetic market
    #[arg(long, value_name = "FILE")]
    prices: Option<PathBuf>,
    /// Universe CSV (asset_id,class)
    #[arg(long, value_name = "FILE")]
    universe: Option<PathBuf>,
    /// Synthetic-market seed (only used when no price files are given)
    #[arg(long)]
    seed: Option<u64>,
    /// Return days per rebalancing period
    #[arg(long)]
    period_len: Option<usize>,
    /// benchmark | temporal | type | mixed (score defaults to all four)
    #[arg(long)]
    forecaster: Option<String>,
    /// benchmark | rtt | compensated (backtest defaults to all three)
    #[arg(long)]
    strategy: Option<String>,
    /// etfs | stocks | both
    #[arg(long)]
    short_leg: Option<String>,
    /// Comma-separated rolling windows, in periods
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Comma-separated look-back windows for the temporal forecaster
    #[arg(long, value_delimiter = ',')]
    temporal_windows: Option<Vec<usize>>,
    /// Comma-separated mixing weights, one per temporal window
    #[arg(long, value_delimiter = ',')]
    temporal_weights: Option<Vec<f64>>,
    /// periods | days (how --temporal-windows is expressed)
    #[arg(long)]
    temporal_window_unit: Option<String>,
    /// Look-back, in periods, for the class-occupancy forecaster
    #[arg(long)]
    class_window: Option<usize>,
    /// Temporal share in the mixed forecaster, in [0, 1]
    #[arg(long)]
    mix_weight: Option<f64>,
    #[arg(long)]
    long_horizon: Option<usize>,
    #[arg(long)]
    short_horizon: Option<usize>,
    #[arg(long)]
    long_rank_pct: Option<f64>,
    #[arg(long)]
    short_rank_pct: Option<f64>,
    #[arg(long)]
    long_frac: Option<f64>,
    #[arg(long)]
    short_frac: Option<f64>,
}

impl RunFlags {
    fn data_source(&self) -> DataSource {
        DataSource {
            prices: self.prices.clone(),
            universe: self.universe.clone(),
        }
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn apply_synth_flags(cfg: &mut RunConfig, f: &SynthFlags) {
    if let Some(v) = f.seed {
        cfg.synth.seed = v;
    }
    if let Some(v) = f.n_stocks {
        cfg.synth.n_stocks = v;
    }
    if let Some(v) = f.n_etfs {
        cfg.synth.n_etfs = v;
    }
    if let Some(v) = f.n_days {
        cfg.synth.n_days = v;
    }
    if let Some(v) = f.stock_vol {
        cfg.synth.stock_vol = v;
    }
    if let Some(v) = f.etf_vol {
        cfg.synth.etf_vol = v;
    }
    if let Some(v) = f.stock_drift {
        cfg.synth.stock_drift = v;
    }
    if let Some(v) = f.etf_drift {
        cfg.synth.etf_drift = v;
    }
    if f.include_vxx_like {
        cfg.synth.include_vxx_like = true;
    }
}

/// Which config list a `--windows` flag should land in.
enum WindowsTarget {
    Score,
    Backtest,
    Ignored,
}

fn apply_run_flags(cfg: &mut RunConfig, f: &RunFlags, target: WindowsTarget) {
    if let Some(v) = f.seed {
        cfg.synth.seed = v;
    }
    if let Some(v) = f.period_len {
        cfg.period_len = v;
    }
    if let Some(v) = &f.forecaster {
        cfg.forecaster = Some(v.clone());
    }
    if let Some(v) = &f.strategy {
        cfg.strategy = Some(v.clone());
    }
    if let Some(v) = &f.short_leg {
        cfg.short_leg = v.clone();
    }
    if let Some(v) = &f.windows {
        match target {
            WindowsTarget::Score => cfg.score_windows = v.clone(),
            WindowsTarget::Backtest => cfg.backtest_windows = v.clone(),
            WindowsTarget::Ignored => {}
        }
    }
    if let Some(v) = &f.temporal_windows {
        cfg.temporal_windows = v.clone();
    }
    if let Some(v) = &f.temporal_weights {
        cfg.temporal_weights = v.clone();
    }
    if let Some(v) = &f.temporal_window_unit {
        cfg.temporal_window_unit = v.clone();
    }
    if let Some(v) = f.class_window {
        cfg.class_window = v;
    }
    if let Some(v) = f.mix_weight {
        cfg.mix_weight = v;
    }
    if let Some(v) = f.long_horizon {
        cfg.long_horizon_days = v;
    }
    if let Some(v) = f.short_horizon {
        cfg.short_horizon_days = v;
    }
    if let Some(v) = f.long_rank_pct {
        cfg.long_rank_pct = v;
    }
    if let Some(v) = f.short_rank_pct {
        cfg.short_rank_pct = v;
    }
    if let Some(v) = f.long_frac {
        cfg.long_frac = v;
    }
    if let Some(v) = f.short_frac {
        cfg.short_frac = v;
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Cmd::Synth { common, flags } => {
            let mut cfg = base_config(&common)?;
            apply_synth_flags(&mut cfg, &flags);
            cfg.synth.validate()?;
            commands::cmd_synth(&cfg, &common.out)
        }
        Cmd::Forecast { common, flags } => {
            let mut cfg = base_config(&common)?;
            apply_run_flags(&mut cfg, &flags, WindowsTarget::Ignored);
            commands::cmd_forecast(&cfg, &flags.data_source(), &common.out)
        }
        Cmd::Score { common, flags } => {
            let mut cfg = base_config(&common)?;
            apply_run_flags(&mut cfg, &flags, WindowsTarget::Score);
            commands::cmd_score(&cfg, &flags.data_source(), &common.out)
        }
        Cmd::Backtest { common, flags } => {
            let mut cfg = base_config(&common)?;
            apply_run_flags(&mut cfg, &flags, WindowsTarget::Backtest);
            commands::cmd_backtest(&cfg, &flags.data_source(), &common.out)
        }
    }
}

/// Dying silently on a closed pipe (`rankcast score | head`) is the normal
/// unix convention; the default Rust handler would panic with a backtrace.
#[cfg(unix)]
fn reset_sigpipe() {
    extern "C" {
        fn signal(signum: i32, handler: usize) -> usize;
    }
    const SIGPIPE: i32 = 13;
    const SIG_DFL: usize = 0;
    unsafe {
        signal(SIGPIPE, SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version land here; they are successes.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
