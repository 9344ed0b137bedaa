//! Quintile rank forecasting and portfolio backtesting on daily closes.
//!
//! The pipeline: load (or synthesize) a dense date × asset price table,
//! carve it into fixed-length periods, rank each period's cross-section of
//! returns into quintiles, forecast next-period quintile probabilities from
//! history alone, score forecasts with the ranked probability score, and
//! run rebalanced portfolios (equal-weight benchmark, trend-regression, and
//! compensated long/short) through the same calendar with information-ratio
//! reporting.
//!
//! Everything is deterministic: fixed reduction orders, seeded generators,
//! and sorted map keys in every serialized artifact.

pub mod error;
pub mod forecast;
pub mod market_data;
pub mod perf;
pub mod portfolio;
pub mod quintiles;
pub mod rps;
pub mod synth;

pub use error::{Error, Result};
