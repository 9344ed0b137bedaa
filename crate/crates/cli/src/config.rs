//! Run configuration: JSON file merged with command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rankcast::forecast::{ForecastConfig, TemporalConfig};
use rankcast::perf::BacktestConfig;
use rankcast::portfolio::RttConfig;
use rankcast::synth::SynthConfig;
use rankcast::Error;

/// Every knob a run can turn. Defaults reproduce the standard setup:
/// 20-day periods, temporal windows 5/10/400 weighted 0.2/0.2/0.6, a
/// 1-period class window, a 50/50 mix, trend horizons 120/40 days with
/// rank gates at the 50th/85th percentiles, and a 2/3 long + 1/3 short
/// compensated split.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Return days per period.
    pub period_len: usize,
    /// Forecaster name; unset means score runs all four and forecast
    /// emits the mixed one.
    pub forecaster: Option<String>,
    pub temporal_windows: Vec<usize>,
    pub temporal_weights: Vec<f64>,
    /// "periods" (native) or "days" (converted by period length).
    pub temporal_window_unit: String,
    pub class_window: usize,
    pub mix_weight: f64,
    pub long_horizon_days: usize,
    pub short_horizon_days: usize,
    pub long_rank_pct: f64,
    pub short_rank_pct: f64,
    pub long_frac: f64,
    pub short_frac: f64,
    /// Rolling windows (in periods) for score reports.
    pub score_windows: Vec<usize>,
    /// Rolling windows (in periods) for backtest reports.
    pub backtest_windows: Vec<usize>,
    /// Strategy name; unset means backtest runs all three.
    pub strategy: Option<String>,
    pub short_leg: String,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            period_len: 20,
            forecaster: None,
            temporal_windows: vec![5, 10, 400],
            temporal_weights: vec![0.2, 0.2, 0.6],
            temporal_window_unit: "periods".into(),
            class_window: 1,
            mix_weight: 0.5,
            long_horizon_days: 120,
            short_horizon_days: 40,
            long_rank_pct: 0.50,
            short_rank_pct: 0.85,
            long_frac: 2.0 / 3.0,
            short_frac: 1.0 / 3.0,
            score_windows: vec![3, 12],
            backtest_windows: vec![3, 12, 24, 48],
            strategy: None,
            short_leg: "etfs".into(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
            reason: format!("{}: {e}", path.display()),
        })
    }

    /// Temporal windows in periods, converting from days when asked.
    fn temporal_windows_in_periods(&self) -> Result<Vec<usize>, Error> {
        match self.temporal_window_unit.as_str() {
            "periods" => Ok(self.temporal_windows.clone()),
            "days" => {
                if self.period_len == 0 {
                    return Err(Error::BadPeriodLength);
                }
                Ok(self
                    .temporal_windows
                    .iter()
                    .map(|d| (d / self.period_len).max(1))
                    .collect())
            }
            other => Err(Error::InvalidConfig {
                reason: format!(
                    "temporal_window_unit must be \"periods\" or \"days\", got {other:?}"
                ),
            }),
        }
    }

    pub fn forecast_config(&self) -> Result<ForecastConfig, Error> {
        Ok(ForecastConfig {
            temporal: TemporalConfig::new(
                self.temporal_windows_in_periods()?,
                self.temporal_weights.clone(),
            )?,
            class_window: self.class_window,
            mix_weight: self.mix_weight,
        })
    }

    pub fn rtt_config(&self) -> RttConfig {
        RttConfig {
            long_horizon_days: self.long_horizon_days,
            short_horizon_days: self.short_horizon_days,
            long_rank_pct: self.long_rank_pct,
            short_rank_pct: self.short_rank_pct,
        }
    }

    pub fn backtest_config(&self) -> BacktestConfig {
        BacktestConfig {
            rtt: self.rtt_config(),
            long_frac: self.long_frac,
            short_frac: self.short_frac,
            windows: self.backtest_windows.clone(),
        }
    }
}
