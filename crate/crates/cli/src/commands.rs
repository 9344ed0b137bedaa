//! The four subcommands: synth, forecast, score, backtest.
//!
//! Each writes its artifacts atomically (temp file + rename) into the output
//! directory. Report JSON uses sorted maps and fixed iteration orders, so a
//! rerun with the same inputs reproduces every file byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rankcast::forecast::{forecast_series, write_forecasts_csv, Forecaster};
use rankcast::market_data::{
    build_calendar, build_calendar_with_warmup, load_prices_path, load_universe_path,
    period_returns, write_prices_csv, write_universe_csv, PeriodCalendar, PriceTable,
};
use rankcast::perf::{backtest, IrReport, PerfPoint, Strategy};
use rankcast::portfolio::{write_weights_csv, ShortLeg};
use rankcast::quintiles::{quintile_outcome, rank_assets, write_outcomes_csv, QuintileOutcome};
use rankcast::rps::{rps_report, RollingPoint};
use rankcast::synth::generate_market;
use rankcast::{Error, Result};

use crate::config::RunConfig;

/// Where price data comes from: a pair of CSV paths, or (when both are
/// absent) the built-in synthetic market.
#[derive(Debug, Clone, Default)]
pub struct DataSource {
    pub prices: Option<PathBuf>,
    pub universe: Option<PathBuf>,
}

fn load_table(cfg: &RunConfig, src: &DataSource) -> Result<PriceTable> {
    match (&src.prices, &src.universe) {
        (Some(prices), Some(universe)) => {
            let u = load_universe_path(universe)?;
            let table = load_prices_path(prices, &u)?;
            if table.dropped_dates() > 0 {
                println!(
                    "note: dropped {} date(s) lacking a close for every asset",
                    table.dropped_dates()
                );
            }
            Ok(table)
        }
        (None, None) => {
            println!(
                "no price files given; using the synthetic market (seed {})",
                cfg.synth.seed
            );
            generate_market(&cfg.synth)
        }
        _ => Err(Error::InvalidConfig {
            reason: "provide both --prices and --universe, or neither to use the synthetic market"
                .into(),
        }),
    }
}

fn outcome_series(table: &PriceTable, cal: &PeriodCalendar) -> Result<Vec<QuintileOutcome>> {
    let returns = period_returns(table, cal);
    (0..cal.n_periods())
        .map(|t| quintile_outcome(&rank_assets(returns.row(t), table.universe())?))
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_forecaster(name: &str) -> Result<Forecaster> {
    name.parse()
        .map_err(|reason| Error::InvalidConfig { reason })
}

fn parse_short_leg(name: &str) -> Result<ShortLeg> {
    name.parse()
        .map_err(|reason| Error::InvalidConfig { reason })
}

/// Generates the synthetic market and writes `prices.csv` + `universe.csv`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let table = generate_market(&cfg.synth)?;
    let mut prices = Vec::new();
    write_prices_csv(&table, &mut prices)?;
    write_atomic(&out.join("prices.csv"), &prices)?;
    let mut universe = Vec::new();
    write_universe_csv(table.universe(), &mut universe)?;
    write_atomic(&out.join("universe.csv"), &universe)?;
    println!(
        "wrote {}: {} assets x {} dates (seed {})",
        out.join("prices.csv").display(),
        table.n_assets(),
        table.n_dates(),
        cfg.synth.seed
    );
    println!("wrote {}", out.join("universe.csv").display());
    Ok(())
}

/// Emits per-period probability forecasts as `forecasts.csv`.
pub fn cmd_forecast(cfg: &RunConfig, src: &DataSource, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let forecaster = parse_forecaster(cfg.forecaster.as_deref().unwrap_or("mixed"))?;
    let table = load_table(cfg, src)?;
    let cal = build_calendar(&table, cfg.period_len)?;
    let outcomes = outcome_series(&table, &cal)?;
    let series = forecast_series(
        &outcomes,
        table.universe(),
        forecaster,
        &cfg.forecast_config()?,
    )?;
    let mut buf = Vec::new();
    write_forecasts_csv(&series, table.universe(), &mut buf)?;
    write_atomic(&out.join("forecasts.csv"), &buf)?;
    println!(
        "wrote {}: {} periods x {} assets ({forecaster} forecaster)",
        out.join("forecasts.csv").display(),
        series.len(),
        table.n_assets()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScoreBody {
    aggregate: f64,
    per_period: Vec<f64>,
    rolling: BTreeMap<usize, Vec<RollingPoint>>,
    skipped_windows: Vec<usize>,
}

#[derive(Serialize)]
struct SingleScoreReport {
    forecaster: String,
    period_len: usize,
    n_periods: usize,
    n_assets: usize,
    aggregate: f64,
    per_period: Vec<f64>,
    rolling: BTreeMap<usize, Vec<RollingPoint>>,
    skipped_windows: Vec<usize>,
}

#[derive(Serialize)]
struct MultiScoreReport {
    period_len: usize,
    n_periods: usize,
    n_assets: usize,
    windows: Vec<usize>,
    forecasters: BTreeMap<String, ScoreBody>,
}

/// Scores one or all forecasters; writes `outcomes.csv` and
/// `score_report.json`.
pub fn cmd_score(cfg: &RunConfig, src: &DataSource, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let fc_cfg = cfg.forecast_config()?;
    let chosen: Vec<Forecaster> = match cfg.forecaster.as_deref() {
        Some(name) => vec![parse_forecaster(name)?],
        None => Forecaster::ALL.to_vec(),
    };
    let table = load_table(cfg, src)?;
    let cal = build_calendar(&table, cfg.period_len)?;
    let outcomes = outcome_series(&table, &cal)?;
    let mut obuf = Vec::new();
    write_outcomes_csv(&outcomes, table.universe(), &mut obuf)?;
    write_atomic(&out.join("outcomes.csv"), &obuf)?;

    let mut bodies = BTreeMap::new();
    for fc in &chosen {
        let series = forecast_series(&outcomes, table.universe(), *fc, &fc_cfg)?;
        let report = rps_report(&outcomes, &series, &cfg.score_windows)?;
        println!("{fc}: aggregate rps {:.6}", report.aggregate);
        bodies.insert(
            fc.to_string(),
            ScoreBody {
                aggregate: report.aggregate,
                per_period: report.per_period,
                rolling: report.rolling,
                skipped_windows: report.skipped_windows,
            },
        );
    }

    let json = if chosen.len() == 1 {
        let (name, body) = bodies.into_iter().next().unwrap();
        serde_json::to_string_pretty(&SingleScoreReport {
            forecaster: name,
            period_len: cfg.period_len,
            n_periods: cal.n_periods(),
            n_assets: table.n_assets(),
            aggregate: body.aggregate,
            per_period: body.per_period,
            rolling: body.rolling,
            skipped_windows: body.skipped_windows,
        })
    } else {
        serde_json::to_string_pretty(&MultiScoreReport {
            period_len: cfg.period_len,
            n_periods: cal.n_periods(),
            n_assets: table.n_assets(),
            windows: cfg.score_windows.clone(),
            forecasters: bodies,
        })
    }
    .expect("report serialization cannot fail");
    write_atomic(&out.join("score_report.json"), format!("{json}\n").as_bytes())?;
    println!("wrote {}", out.join("score_report.json").display());
    Ok(())
}

#[derive(Serialize)]
struct StrategyBody {
    strategy: String,
    full: IrReport,
    windows: BTreeMap<usize, Vec<PerfPoint>>,
    skipped_windows: Vec<usize>,
    flags: Vec<String>,
}

#[derive(Serialize)]
struct SingleBacktestReport {
    period_len: usize,
    n_periods: usize,
    warmup_days: usize,
    #[serde(flatten)]
    body: StrategyBody,
}

#[derive(Serialize)]
struct MultiBacktestReport {
    period_len: usize,
    n_periods: usize,
    warmup_days: usize,
    windows: Vec<usize>,
    strategies: BTreeMap<String, StrategyBody>,
}

/// Backtests one or all strategies; writes `weights_<strategy>.csv` per
/// strategy and one `backtest_report.json`.
pub fn cmd_backtest(cfg: &RunConfig, src: &DataSource, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let bt_cfg = cfg.backtest_config();
    bt_cfg.rtt.validate()?;
    let warmup = bt_cfg.rtt.max_horizon();
    let leg = parse_short_leg(&cfg.short_leg)?;
    let chosen: Vec<Strategy> = match cfg.strategy.as_deref() {
        Some("benchmark") => vec![Strategy::Benchmark],
        Some("rtt") => vec![Strategy::Rtt],
        Some("compensated") => vec![Strategy::Compensated(leg)],
        Some(other) => {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "unknown strategy {other:?} (expected benchmark, rtt, or compensated)"
                ),
            })
        }
        None => vec![
            Strategy::Benchmark,
            Strategy::Rtt,
            Strategy::Compensated(leg),
        ],
    };
    let table = load_table(cfg, src)?;
    let cal = build_calendar_with_warmup(&table, cfg.period_len, warmup)?;

    let mut bodies = BTreeMap::new();
    for strategy in &chosen {
        let rep = backtest(*strategy, &table, &cal, &bt_cfg)?;
        let name = strategy.to_string();
        let mut wbuf = Vec::new();
        write_weights_csv(&rep.weights, table.universe(), &mut wbuf)?;
        let wpath = out.join(format!("weights_{name}.csv"));
        write_atomic(&wpath, &wbuf)?;
        println!(
            "{name}: full-sample ret {:.6}, ir {:.4} ({} flags); wrote {}",
            rep.full.ret,
            rep.full.ir,
            rep.flags.len(),
            wpath.display()
        );
        bodies.insert(
            name.clone(),
            StrategyBody {
                strategy: name,
                full: rep.full,
                windows: rep.rolling.windows,
                skipped_windows: rep.rolling.skipped,
                flags: rep.flags,
            },
        );
    }

    let json = if chosen.len() == 1 {
        let (_, body) = bodies.into_iter().next().unwrap();
        serde_json::to_string_pretty(&SingleBacktestReport {
            period_len: cfg.period_len,
            n_periods: cal.n_periods(),
            warmup_days: warmup,
            body,
        })
    } else {
        serde_json::to_string_pretty(&MultiBacktestReport {
            period_len: cfg.period_len,
            n_periods: cal.n_periods(),
            warmup_days: warmup,
            windows: cfg.backtest_windows.clone(),
            strategies: bodies,
        })
    }
    .expect("report serialization cannot fail");
    write_atomic(
        &out.join("backtest_report.json"),
        format!("{json}\n").as_bytes(),
    )?;
    println!("wrote {}", out.join("backtest_report.json").display());
    Ok(())
}
