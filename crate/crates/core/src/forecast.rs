//! Rank-probability forecasters.
//!
//! A forecast row assigns each asset a probability for landing in each of
//! the five quintiles next period. Every forecaster here is an average of
//! past realized one-hot outcomes over some slice of history:
//!
//! * benchmark — uniform 0.2 everywhere,
//! * temporal — weighted average of trailing-window occupancy means per asset,
//! * class — recent occupancy of the asset's class (stocks vs ETFs),
//! * mixed — convex blend of temporal and class.
//!
//! Forecasts for period t may use outcomes of periods 0..t only; the driver
//! [`forecast_series`] enforces that and falls back to the benchmark when
//! there is no history at all.

use std::io::{BufWriter, Write};

use crate::error::{Error, Result};
use crate::market_data::AssetUniverse;
use crate::quintiles::{QuintileOutcome, QUINTILE_COUNT};

/// One probability row per asset; every row lies on the 4-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMatrix {
    rows: Vec<[f64; QUINTILE_COUNT]>,
}

impl ForecastMatrix {
    /// Validates that every row is a probability vector (entries in [0, 1],
    /// sum within 1e-12 of one).
    pub fn from_rows(rows: Vec<[f64; QUINTILE_COUNT]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput {
                context: "forecast matrix has no rows".into(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            let ok = row.iter().all(|p| p.is_finite() && *p >= 0.0 && *p <= 1.0)
                && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
            if !ok {
                return Err(Error::NotASimplex { index: i });
            }
        }
        Ok(ForecastMatrix { rows })
    }

    pub fn uniform(n_assets: usize) -> Self {
        assert!(n_assets >= 1, "need at least one asset");
        ForecastMatrix {
            rows: vec![[1.0 / QUINTILE_COUNT as f64; QUINTILE_COUNT]; n_assets],
        }
    }

    pub fn n_assets(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64; QUINTILE_COUNT] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[[f64; QUINTILE_COUNT]] {
        &self.rows
    }
}

/// The no-information benchmark: probability 0.2 for every quintile.
pub fn uniform_forecast(n_assets: usize) -> ForecastMatrix {
    ForecastMatrix::uniform(n_assets)
}

/// Trailing windows (in periods) and their mixture weights for the temporal
/// forecaster. Weights are normalized to sum to one at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConfig {
    windows: Vec<usize>,
    weights: Vec<f64>,
}

impl TemporalConfig {
    pub fn new(windows: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if windows.is_empty() || windows.len() != weights.len() {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "need matching non-empty window/weight lists, got {} and {}",
                    windows.len(),
                    weights.len()
                ),
            });
        }
        if windows.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig {
                reason: "temporal windows must be at least 1 period".into(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidConfig {
                reason: "temporal weights must be positive".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(TemporalConfig { windows, weights })
    }

    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig::new(vec![5, 10, 400], vec![0.2, 0.2, 0.6]).unwrap()
    }
}

/// Per-asset weighted average of trailing occupancy means.
///
/// For each window w the per-asset mean of the last min(w, len) one-hot
/// outcomes is taken; the final row is the weight-mixture of those means.
/// Windows longer than the available history clamp to it while keeping
/// their own weights.
pub fn temporal_forecast(
    history: &[QuintileOutcome],
    cfg: &TemporalConfig,
) -> Result<ForecastMatrix> {
    if history.is_empty() {
        return Err(Error::EmptyInput {
            context: "temporal forecast needs at least one past period".into(),
        });
    }
    let n = history[0].n_assets();
    check_history_shapes(history, n)?;
    let len = history.len();
    let mut rows = vec![[0.0; QUINTILE_COUNT]; n];
    for (&w, &weight) in cfg.windows.iter().zip(&cfg.weights) {
        let eff = w.min(len);
        let slice = &history[len - eff..];
        let inv = 1.0 / eff as f64;
        for i in 0..n {
            let mut mean = [0.0; QUINTILE_COUNT];
            for o in slice {
                mean[o.quintile(i) as usize - 1] += inv;
            }
            for k in 0..QUINTILE_COUNT {
                rows[i][k] += weight * mean[k];
            }
        }
    }
    ForecastMatrix::from_rows(rows)
}

/// Gives every asset its class's pooled occupancy over the supplied trailing
/// periods, so stocks share one row and ETFs another.
pub fn class_forecast(
    trailing: &[QuintileOutcome],
    universe: &AssetUniverse,
) -> Result<ForecastMatrix> {
    if trailing.is_empty() {
        return Err(Error::EmptyInput {
            context: "class forecast needs at least one past period".into(),
        });
    }
    check_history_shapes(trailing, universe.len())?;
    let n = universe.len();
    // Pool per class lazily: a class row exists iff the class has members.
    let mut class_rows: std::collections::HashMap<
        crate::market_data::AssetClass,
        [f64; QUINTILE_COUNT],
    > = std::collections::HashMap::new();
    for class in [
        crate::market_data::AssetClass::Stock,
        crate::market_data::AssetClass::Etf,
    ] {
        let members = universe.class_indices(class);
        if members.is_empty() {
            continue;
        }
        let inv = 1.0 / (trailing.len() * members.len()) as f64;
        let mut row = [0.0; QUINTILE_COUNT];
        for o in trailing {
            for &i in &members {
                row[o.quintile(i) as usize - 1] += inv;
            }
        }
        class_rows.insert(class, row);
    }
    let rows = (0..n)
        .map(|i| class_rows[&universe.asset(i).class])
        .collect();
    ForecastMatrix::from_rows(rows)
}

/// Convex combination `weight_a * a + (1 - weight_a) * b`, row by row.
pub fn blend(a: &ForecastMatrix, b: &ForecastMatrix, weight_a: f64) -> Result<ForecastMatrix> {
    if a.n_assets() != b.n_assets() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "blending {} rows with {} rows",
                a.n_assets(),
                b.n_assets()
            ),
        });
    }
    if !(0.0..=1.0).contains(&weight_a) || !weight_a.is_finite() {
        return Err(Error::InvalidConfig {
            reason: format!("blend weight must lie in [0, 1], got {weight_a}"),
        });
    }
    let rows = a
        .rows()
        .iter()
        .zip(b.rows())
        .map(|(ra, rb)| {
            let mut row = [0.0; QUINTILE_COUNT];
            for k in 0..QUINTILE_COUNT {
                row[k] = weight_a * ra[k] + (1.0 - weight_a) * rb[k];
            }
            row
        })
        .collect();
    ForecastMatrix::from_rows(rows)
}

/// Equal-weight blend of two forecasts.
pub fn mixed_forecast(a: &ForecastMatrix, b: &ForecastMatrix) -> Result<ForecastMatrix> {
    blend(a, b, 0.5)
}

fn check_history_shapes(history: &[QuintileOutcome], n: usize) -> Result<()> {
    for (t, o) in history.iter().enumerate() {
        if o.n_assets() != n {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "outcome {t} covers {} assets, expected {n}",
                    o.n_assets()
                ),
            });
        }
    }
    Ok(())
}

/// Which forecaster to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Forecaster {
    /// Uniform 0.2 benchmark.
    Benchmark,
    /// Weighted trailing-window occupancy per asset.
    Temporal,
    /// Class-conditional occupancy (stocks vs ETFs).
    Type,
    /// Equal blend of temporal and class.
    Mixed,
}

impl Forecaster {
    pub const ALL: [Forecaster; 4] = [
        Forecaster::Benchmark,
        Forecaster::Temporal,
        Forecaster::Type,
        Forecaster::Mixed,
    ];
}

impl std::fmt::Display for Forecaster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Forecaster::Benchmark => "benchmark",
            Forecaster::Temporal => "temporal",
            Forecaster::Type => "type",
            Forecaster::Mixed => "mixed",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Forecaster {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benchmark" => Ok(Forecaster::Benchmark),
            "temporal" => Ok(Forecaster::Temporal),
            "type" => Ok(Forecaster::Type),
            "mixed" => Ok(Forecaster::Mixed),
            other => Err(format!(
                "unknown forecaster {other:?} (expected benchmark, temporal, type, or mixed)"
            )),
        }
    }
}

/// Everything the non-benchmark forecasters need.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub temporal: TemporalConfig,
    /// Trailing periods pooled by the class forecaster.
    pub class_window: usize,
    /// Weight on the temporal component inside the mixed forecaster.
    pub mix_weight: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            temporal: TemporalConfig::default(),
            class_window: 1,
            mix_weight: 0.5,
        }
    }
}

impl ForecastConfig {
    fn validate(&self) -> Result<()> {
        if self.class_window == 0 {
            return Err(Error::InvalidConfig {
                reason: "class window must be at least 1 period".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.mix_weight) || !self.mix_weight.is_finite() {
            return Err(Error::InvalidConfig {
                reason: format!("mix weight must lie in [0, 1], got {}", self.mix_weight),
            });
        }
        Ok(())
    }
}

/// Produces one forecast per outcome period, each built strictly from the
/// outcomes before it. Period 0 has no history and gets the benchmark row.
pub fn forecast_series(
    outcomes: &[QuintileOutcome],
    universe: &AssetUniverse,
    forecaster: Forecaster,
    cfg: &ForecastConfig,
) -> Result<Vec<ForecastMatrix>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput {
            context: "no outcome periods to forecast".into(),
        });
    }
    cfg.validate()?;
    check_history_shapes(outcomes, universe.len())?;
    let n = universe.len();
    let mut out = Vec::with_capacity(outcomes.len());
    for t in 0..outcomes.len() {
        let history = &outcomes[..t];
        let fc = if history.is_empty() {
            uniform_forecast(n)
        } else {
            match forecaster {
                Forecaster::Benchmark => uniform_forecast(n),
                Forecaster::Temporal => temporal_forecast(history, &cfg.temporal)?,
                Forecaster::Type => {
                    let k = cfg.class_window.min(history.len());
                    class_forecast(&history[history.len() - k..], universe)?
                }
                Forecaster::Mixed => {
                    let temporal = temporal_forecast(history, &cfg.temporal)?;
                    let k = cfg.class_window.min(history.len());
                    let class = class_forecast(&history[history.len() - k..], universe)?;
                    blend(&temporal, &class, cfg.mix_weight)?
                }
            }
        };
        out.push(fc);
    }
    Ok(out)
}

/// Writes forecasts as `period,asset_id,f1,f2,f3,f4,f5`, period-major then
/// universe order.
pub fn write_forecasts_csv<W: Write>(
    forecasts: &[ForecastMatrix],
    universe: &AssetUniverse,
    writer: &mut W,
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "period,asset_id,f1,f2,f3,f4,f5")?;
    for (t, fc) in forecasts.iter().enumerate() {
        if fc.n_assets() != universe.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "forecast {t} covers {} assets, universe has {}",
                    fc.n_assets(),
                    universe.len()
                ),
            });
        }
        for i in 0..universe.len() {
            let row = fc.row(i);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t,
                universe.asset(i).id,
                row[0],
                row[1],
                row[2],
                row[3],
                row[4]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
