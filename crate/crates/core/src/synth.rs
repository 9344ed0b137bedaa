//! Deterministic synthetic market for self-contained runs and tests.
//!
//! Each asset follows a seeded geometric walk,
//! S_{t+1} = S_t * exp(drift + vol * z) with z standard normal, starting at
//! 100. Stocks and ETFs get separate drift/vol, and an optional
//! high-volatility inverse-drift ETF ("XVOL") sits last in the universe.
//! Draws come from a ChaCha stream in day-major order, so one seed fixes
//! every price bit for bit.

use chrono::{Datelike, NaiveDate, Weekday};
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{Asset, AssetClass, AssetUniverse, PriceTable};

/// Parameters of the synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_etfs: usize,
    /// Number of trading dates to generate (including the initial one).
    pub n_days: usize,
    /// Daily log-return volatility per class.
    pub stock_vol: f64,
    pub etf_vol: f64,
    /// Daily log-return drift per class.
    pub stock_drift: f64,
    pub etf_drift: f64,
    /// Appends one ETF with twice the stock volatility and a strong negative
    /// drift, mimicking a volatility note that decays over time.
    pub include_vxx_like: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_stocks: 50,
            n_etfs: 50,
            n_days: 1100,
            stock_vol: 0.02,
            etf_vol: 0.01,
            stock_drift: 0.0003,
            etf_drift: 0.0002,
            include_vxx_like: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stocks + self.n_etfs == 0 && !self.include_vxx_like {
            return Err(Error::InvalidConfig {
                reason: "synthetic universe needs at least one asset".into(),
            });
        }
        if self.n_days < 2 {
            return Err(Error::InvalidConfig {
                reason: format!("need at least 2 dates, got {}", self.n_days),
            });
        }
        for (name, v) in [
            ("stock_vol", self.stock_vol),
            ("etf_vol", self.etf_vol),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig {
                    reason: format!("{name} must be finite and non-negative, got {v}"),
                });
            }
        }
        for (name, v) in [
            ("stock_drift", self.stock_drift),
            ("etf_drift", self.etf_drift),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig {
                    reason: format!("{name} must be finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

const START_PRICE: f64 = 100.0;
const VXX_DRIFT: f64 = -0.002;

/// Standard normal sampler: Marsaglia's polar method over a ChaCha stream.
struct NormalSource {
    rng: rand_chacha::ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    fn new(seed: u64) -> Self {
        NormalSource {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform draw in (0, 1].
    fn unit(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.unit() - 1.0;
            let v = 2.0 * self.unit() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * m);
                return u * m;
            }
        }
    }
}

fn weekday_dates(n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(); // a Monday
    while dates.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    dates
}

/// Generates the universe and price table for one seed. Prices stay strictly
/// positive by construction; dates are consecutive weekdays from 2010-01-04.
pub fn generate_market(cfg: &SynthConfig) -> Result<PriceTable> {
    cfg.validate()?;
    let mut assets: Vec<Asset> = Vec::new();
    let mut params: Vec<(f64, f64)> = Vec::new(); // (drift, vol) per asset
    for i in 0..cfg.n_stocks {
        assets.push(Asset {
            id: format!("STK{i:03}"),
            class: AssetClass::Stock,
        });
        params.push((cfg.stock_drift, cfg.stock_vol));
    }
    for i in 0..cfg.n_etfs {
        assets.push(Asset {
            id: format!("ETF{i:03}"),
            class: AssetClass::Etf,
        });
        params.push((cfg.etf_drift, cfg.etf_vol));
    }
    if cfg.include_vxx_like {
        assets.push(Asset {
            id: "XVOL".into(),
            class: AssetClass::Etf,
        });
        params.push((VXX_DRIFT, 2.0 * cfg.stock_vol));
    }
    let universe = AssetUniverse::new(assets)?;
    let n = universe.len();
    let dates = weekday_dates(cfg.n_days);

    let mut normals = NormalSource::new(cfg.seed);
    let mut values = Vec::with_capacity(cfg.n_days * n);
    values.extend(std::iter::repeat(START_PRICE).take(n));
    for day in 1..cfg.n_days {
        for i in 0..n {
            let (drift, vol) = params[i];
            let z = normals.next_normal();
            let prev = values[(day - 1) * n + i];
            values.push(prev * (drift + vol * z).exp());
        }
    }
    PriceTable::from_parts(universe, dates, values)
}
