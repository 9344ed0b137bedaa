//! Portfolio construction rules.
//!
//! The trend-regression portfolio bets on mean reversion toward the long-run
//! trend: it holds, equally weighted, the stocks that look strong over a
//! long trailing window (price ratio rank above the `long_rank_pct`
//! percentile) but not over a short one (rank at or below the
//! `short_rank_pct` percentile). Ranks span the whole universe; only stocks
//! are eligible to be held. The compensated variant funds part of the book
//! with a short leg spread equally over ETFs, stocks, or everything.

use std::io::{BufWriter, Write};

use crate::error::{Error, Result};
use crate::market_data::{AssetClass, AssetUniverse, PriceTable};
use crate::quintiles::rank_assets;

/// One weight per universe asset. Positive = long, negative = short.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    values: Vec<f64>,
}

impl PortfolioWeights {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput {
                context: "no weights".into(),
            });
        }
        if values.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(PortfolioWeights { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of absolute weights.
    pub fn gross(&self) -> f64 {
        self.values.iter().map(|w| w.abs()).sum()
    }

    /// Signed sum of weights.
    pub fn net(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Equal weight on every universe asset.
pub fn benchmark_weights(universe: &AssetUniverse) -> PortfolioWeights {
    let n = universe.len();
    PortfolioWeights {
        values: vec![1.0 / n as f64; n],
    }
}

/// Trailing horizons and rank percentiles for trend-regression selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttConfig {
    pub long_horizon_days: usize,
    pub short_horizon_days: usize,
    pub long_rank_pct: f64,
    pub short_rank_pct: f64,
}

impl Default for RttConfig {
    fn default() -> Self {
        RttConfig {
            long_horizon_days: 120,
            short_horizon_days: 40,
            long_rank_pct: 0.50,
            short_rank_pct: 0.85,
        }
    }
}

impl RttConfig {
    pub fn validate(&self) -> Result<()> {
        if self.long_horizon_days == 0 || self.short_horizon_days == 0 {
            return Err(Error::InvalidConfig {
                reason: "trailing horizons must be at least 1 day".into(),
            });
        }
        for (name, pct) in [
            ("long_rank_pct", self.long_rank_pct),
            ("short_rank_pct", self.short_rank_pct),
        ] {
            if !pct.is_finite() || !(0.0..=1.0).contains(&pct) {
                return Err(Error::InvalidConfig {
                    reason: format!("{name} must lie in [0, 1], got {pct}"),
                });
            }
        }
        Ok(())
    }

    /// History (in days) needed before a rebalance day.
    pub fn max_horizon(&self) -> usize {
        self.long_horizon_days.max(self.short_horizon_days)
    }
}

/// Rank cutoff an asset's long-window rank must exceed: round(pct * n).
pub fn long_cutoff(n: usize, pct: f64) -> usize {
    (pct * n as f64).round() as usize
}

/// Rank cutoff an asset's short-window rank must not exceed: floor(pct * n),
/// nudged so exact products survive binary rounding.
pub fn short_cutoff(n: usize, pct: f64) -> usize {
    (pct * n as f64 + 1e-9).floor() as usize
}

/// Trend-regression weights plus whether the empty-selection fallback fired.
#[derive(Debug, Clone, PartialEq)]
pub struct RttWeights {
    pub weights: PortfolioWeights,
    /// True when no stock passed both gates and the portfolio fell back to
    /// equal weight over all stocks.
    pub fallback: bool,
}

/// Builds the trend-regression portfolio for a rebalance on `day_index`
/// using closes strictly before it: equal weight on stocks ranked above
/// `long_rank_pct` by the long-horizon price ratio and at or below
/// `short_rank_pct` by the short-horizon one.
pub fn rtt_weights(
    table: &PriceTable,
    day_index: usize,
    cfg: &RttConfig,
) -> Result<RttWeights> {
    cfg.validate()?;
    let universe = table.universe();
    let n = universe.len();
    let stocks = universe.class_indices(AssetClass::Stock);
    if stocks.is_empty() {
        return Err(Error::EmptySelection {
            context: "trend-regression needs at least one stock".into(),
        });
    }
    let long_ratio = crate::market_data::trailing_ratio(table, day_index, cfg.long_horizon_days)?;
    let short_ratio =
        crate::market_data::trailing_ratio(table, day_index, cfg.short_horizon_days)?;
    let long_rank = rank_assets(&long_ratio, universe)?;
    let short_rank = rank_assets(&short_ratio, universe)?;
    let above = long_cutoff(n, cfg.long_rank_pct);
    let below = short_cutoff(n, cfg.short_rank_pct);

    let selected: Vec<usize> = stocks
        .iter()
        .copied()
        .filter(|&i| long_rank.rank(i) > above && short_rank.rank(i) <= below)
        .collect();

    let (hold, fallback) = if selected.is_empty() {
        (stocks, true)
    } else {
        (selected, false)
    };
    let w = 1.0 / hold.len() as f64;
    let mut values = vec![0.0; n];
    for i in hold {
        values[i] = w;
    }
    Ok(RttWeights {
        weights: PortfolioWeights { values },
        fallback,
    })
}

/// Which assets the compensated short leg is spread over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShortLeg {
    Etfs,
    Stocks,
    Both,
}

impl std::fmt::Display for ShortLeg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ShortLeg::Etfs => "etfs",
            ShortLeg::Stocks => "stocks",
            ShortLeg::Both => "both",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ShortLeg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "etfs" => Ok(ShortLeg::Etfs),
            "stocks" => Ok(ShortLeg::Stocks),
            "both" => Ok(ShortLeg::Both),
            other => Err(format!(
                "unknown short leg {other:?} (expected etfs, stocks, or both)"
            )),
        }
    }
}

/// Scales a long book to `long_frac` and shorts `short_frac` spread equally
/// over the chosen leg. Overlapping long and short positions net additively
/// in the same weight.
pub fn compensated_weights(
    long: &PortfolioWeights,
    universe: &AssetUniverse,
    leg: ShortLeg,
    long_frac: f64,
    short_frac: f64,
) -> Result<PortfolioWeights> {
    if long.len() != universe.len() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "{} long weights for {} assets",
                long.len(),
                universe.len()
            ),
        });
    }
    for (name, frac) in [("long_frac", long_frac), ("short_frac", short_frac)] {
        if !frac.is_finite() || frac < 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("{name} must be a non-negative finite number, got {frac}"),
            });
        }
    }
    let short_indices: Vec<usize> = match leg {
        ShortLeg::Etfs => universe.class_indices(AssetClass::Etf),
        ShortLeg::Stocks => universe.class_indices(AssetClass::Stock),
        ShortLeg::Both => (0..universe.len()).collect(),
    };
    if short_indices.is_empty() {
        return Err(Error::EmptySelection {
            context: format!("short leg {leg} has no assets"),
        });
    }
    let short_w = short_frac / short_indices.len() as f64;
    let mut values: Vec<f64> = long.values().iter().map(|w| long_frac * w).collect();
    for i in short_indices {
        values[i] -= short_w;
    }
    Ok(PortfolioWeights { values })
}

fn format_sig12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - exp);
    (x * scale).round() / scale
}

/// Writes a weight schedule as `period,asset_id,weight`, period-major then
/// universe order. Weights carry 12 significant digits.
pub fn write_weights_csv<W: Write>(
    schedule: &[PortfolioWeights],
    universe: &AssetUniverse,
    writer: &mut W,
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "period,asset_id,weight")?;
    for (t, pw) in schedule.iter().enumerate() {
        if pw.len() != universe.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "period {t} has {} weights, universe has {}",
                    pw.len(),
                    universe.len()
                ),
            });
        }
        for i in 0..universe.len() {
            writeln!(
                w,
                "{},{},{}",
                t,
                universe.asset(i).id,
                format_sig12(pw.get(i))
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{Asset, PriceTable};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn mixed_universe(n_stocks: usize, n_etfs: usize) -> AssetUniverse {
        let mut assets: Vec<Asset> = (0..n_stocks)
            .map(|i| Asset {
                id: format!("S{i:02}"),
                class: AssetClass::Stock,
            })
            .collect();
        assets.extend((0..n_etfs).map(|i| Asset {
            id: format!("E{i:02}"),
            class: AssetClass::Etf,
        }));
        AssetUniverse::new(assets).unwrap()
    }

    /// Builds a table whose trailing ratios at `day_index = n_dates` are
    /// exactly `long[i]` and `short[i]`. All other days sit at 100.
    fn table_with_ratios(
        universe: &AssetUniverse,
        long_horizon: usize,
        short_horizon: usize,
        long: &[f64],
        short: &[f64],
    ) -> PriceTable {
        let n_dates = long_horizon + 2;
        let n = universe.len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<_> = (0..n_dates)
            .map(|d| start + chrono::Days::new(d as u64))
            .collect();
        let last = n_dates - 1;
        let mut values = vec![100.0; n_dates * n];
        for i in 0..n {
            values[last * n + i] = 100.0 * long[i];
            // ratio(short) = S[last] / S[last - short_horizon]
            values[(last - short_horizon) * n + i] = 100.0 * long[i] / short[i];
        }
        PriceTable::from_parts(universe.clone(), dates, values).unwrap()
    }

    #[test]
    fn benchmark_is_equal_weight() {
        let u = mixed_universe(2, 2);
        let w = benchmark_weights(&u);
        assert_eq!(w.values(), &[0.25; 4]);
        assert!((w.gross() - 1.0).abs() < 1e-15);
        assert!((w.net() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cutoffs_match_round_and_floor() {
        assert_eq!(long_cutoff(100, 0.5), 50);
        assert_eq!(short_cutoff(100, 0.85), 85);
        assert_eq!(long_cutoff(10, 0.5), 5);
        assert_eq!(short_cutoff(10, 0.85), 8);
        // floor with a guard against 0.7 * 10 = 6.999…
        assert_eq!(short_cutoff(10, 0.7), 7);
        assert_eq!(short_cutoff(3, 0.85), 2);
    }

    #[test]
    fn selection_boundaries_at_n_100() {
        // 100 stocks. Long ranks follow the index; short ranks follow a
        // permutation pinned at the gate boundaries.
        let n = 100;
        let u = mixed_universe(n, 0);
        let mut sigma: Vec<usize> = (1..=n).collect();
        sigma.swap(50, 84); // stock 50: long rank 51, short rank 85 -> in
        sigma.swap(49, 0); // stock 49: long rank 50 -> out by the long gate
        sigma.swap(99, 85); // stock 99: short rank 86 -> out by the short gate
        let long: Vec<f64> = (0..n).map(|i| 1.0 + (i + 1) as f64 / 1000.0).collect();
        let short: Vec<f64> = (0..n).map(|i| 1.0 + sigma[i] as f64 / 1000.0).collect();
        let t = table_with_ratios(&u, 120, 40, &long, &short);
        let r = rtt_weights(&t, t.n_dates(), &RttConfig::default()).unwrap();
        assert!(!r.fallback);

        let expected: Vec<usize> = (0..n)
            .filter(|&i| i + 1 > 50 && sigma[i] <= 85)
            .collect();
        assert!(expected.contains(&50));
        assert!(!expected.contains(&49));
        assert!(!expected.contains(&99));
        let w = 1.0 / expected.len() as f64;
        for i in 0..n {
            if expected.contains(&i) {
                assert!((r.weights.get(i) - w).abs() < 1e-15, "asset {i}");
            } else {
                assert_eq!(r.weights.get(i), 0.0, "asset {i}");
            }
        }
        assert!((r.weights.net() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_qualifying_stocks_split_the_book() {
        // 10 assets, 6 stocks. Gates: long rank > 5, short rank <= 8.
        let u = mixed_universe(6, 4);
        // Long ratios ascending with index: stock i has long rank i + 1.
        // Stocks 5 qualifies on the long gate only if short rank <= 8.
        let long: Vec<f64> = (0..10).map(|i| 1.0 + (i + 1) as f64 / 100.0).collect();
        // Short ranks: give stocks 4 and 5 middling short ratios, push the
        // ETFs (indices 6..9) to the top of the short ranking.
        let sigma = [3usize, 1, 2, 4, 6, 5, 9, 10, 7, 8];
        let short: Vec<f64> = (0..10).map(|i| 1.0 + sigma[i] as f64 / 100.0).collect();
        let t = table_with_ratios(&u, 12, 4, &long, &short);
        let cfg = RttConfig {
            long_horizon_days: 12,
            short_horizon_days: 4,
            ..RttConfig::default()
        };
        let r = rtt_weights(&t, t.n_dates(), &cfg).unwrap();
        // Long gate passes stocks with rank > 5: stock 5 only... stocks are
        // 0..=5 so ranks 1..=6; stock 5 has rank 6. Short gate: sigma[5] = 5 <= 8.
        // To get two stocks, widen: stock 4 has long rank 5 -> fails. Adjust
        // the long ratios so stocks 4 and 5 outrank the pack.
        let mut long2 = long.clone();
        long2[4] = 1.2;
        long2[5] = 1.25;
        let t2 = table_with_ratios(&u, 12, 4, &long2, &short);
        let r2 = rtt_weights(&t2, t2.n_dates(), &cfg).unwrap();
        assert!(!r2.fallback);
        assert_eq!(r2.weights.get(4), 0.5);
        assert_eq!(r2.weights.get(5), 0.5);
        assert_eq!(r2.weights.values().iter().filter(|w| **w != 0.0).count(), 2);
        // The single-stock variant from the first table is also valid.
        assert!(!r.fallback);
        assert_eq!(r.weights.get(5), 1.0);
    }

    #[test]
    fn empty_selection_falls_back_to_equal_weight_stocks() {
        let u = mixed_universe(6, 4);
        // Stocks hold the lowest long ranks (1..=6), all failing the > 5 gate
        // except stock 5 — which the short gate then rejects (rank 9).
        let long: Vec<f64> = (0..10).map(|i| 1.0 + (i + 1) as f64 / 100.0).collect();
        let sigma = [1usize, 2, 3, 4, 5, 9, 6, 7, 8, 10];
        let short: Vec<f64> = (0..10).map(|i| 1.0 + sigma[i] as f64 / 100.0).collect();
        let t = table_with_ratios(&u, 12, 4, &long, &short);
        let cfg = RttConfig {
            long_horizon_days: 12,
            short_horizon_days: 4,
            ..RttConfig::default()
        };
        let r = rtt_weights(&t, t.n_dates(), &cfg).unwrap();
        assert!(r.fallback);
        for i in 0..6 {
            assert!((r.weights.get(i) - 1.0 / 6.0).abs() < 1e-15);
        }
        for i in 6..10 {
            assert_eq!(r.weights.get(i), 0.0);
        }
    }

    #[test]
    fn rtt_needs_history_and_stocks() {
        let u = mixed_universe(2, 0);
        let long = vec![1.1, 1.2];
        let short = vec![1.0, 1.1];
        let t = table_with_ratios(&u, 12, 4, &long, &short);
        let cfg = RttConfig {
            long_horizon_days: 12,
            short_horizon_days: 4,
            ..RttConfig::default()
        };
        assert!(matches!(
            rtt_weights(&t, 5, &cfg),
            Err(Error::InsufficientHistory { .. })
        ));

        let u_etf = mixed_universe(0, 2);
        let t_etf = table_with_ratios(&u_etf, 12, 4, &long, &short);
        assert!(matches!(
            rtt_weights(&t_etf, t_etf.n_dates(), &cfg),
            Err(Error::EmptySelection { .. })
        ));
    }

    #[test]
    fn compensated_shorts_etfs_equally() {
        let u = mixed_universe(50, 50);
        // Long book: equal weight on the first two stocks.
        let mut long = vec![0.0; 100];
        long[0] = 0.5;
        long[1] = 0.5;
        let long = PortfolioWeights::from_values(long).unwrap();
        let w = compensated_weights(&long, &u, ShortLeg::Etfs, 2.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!((w.get(0) - 1.0 / 3.0).abs() < 1e-15);
        for i in 50..100 {
            assert!((w.get(i) + 1.0 / 150.0).abs() < 1e-15, "etf {i}");
        }
        assert!((w.gross() - 1.0).abs() < 1e-12);
        assert!((w.net() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_overlapping_legs_net_additively() {
        let u = mixed_universe(4, 0);
        let long = benchmark_weights(&u);
        let w = compensated_weights(&long, &u, ShortLeg::Both, 2.0 / 3.0, 1.0 / 3.0).unwrap();
        // Every asset: 2/3 * 1/4 - 1/3 * 1/4 = 1/12.
        for i in 0..4 {
            assert!((w.get(i) - 1.0 / 12.0).abs() < 1e-15);
        }
        assert!((w.net() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_rejects_missing_leg_and_bad_fracs() {
        let u = mixed_universe(4, 0);
        let long = benchmark_weights(&u);
        assert!(matches!(
            compensated_weights(&long, &u, ShortLeg::Etfs, 2.0 / 3.0, 1.0 / 3.0),
            Err(Error::EmptySelection { .. })
        ));
        assert!(matches!(
            compensated_weights(&long, &u, ShortLeg::Stocks, -0.5, 0.5),
            Err(Error::InvalidConfig { .. })
        ));
        let short = PortfolioWeights::from_values(vec![1.0; 3]).unwrap();
        assert!(matches!(
            compensated_weights(&short, &u, ShortLeg::Stocks, 0.5, 0.5),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn weights_csv_keeps_12_significant_digits() {
        let u = mixed_universe(1, 2);
        let w = PortfolioWeights::from_values(vec![2.0 / 3.0, -1.0 / 150.0, 0.0]).unwrap();
        let mut out = Vec::new();
        write_weights_csv(&[w], &u, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "period,asset_id,weight");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "0");
        assert_eq!(row[1], "S00");
        let parsed: f64 = row[2].parse().unwrap();
        assert!((parsed - 2.0 / 3.0).abs() < 1e-11);
        // 12 significant digits, not more.
        assert!(row[2].len() <= 14, "{}", row[2]);
        let row2: Vec<&str> = lines.next().unwrap().split(',').collect();
        let parsed2: f64 = row2[2].parse().unwrap();
        assert!((parsed2 + 1.0 / 150.0).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn rtt_weights_form_long_only_unit_book(
            grid in proptest::collection::vec(1u32..1000, 4..20),
            n_etfs in 0usize..4,
        ) {
            let n = grid.len();
            let n_stocks = n.saturating_sub(n_etfs).max(1);
            let n_etfs = n - n_stocks;
            let u = mixed_universe(n_stocks, n_etfs);
            let long: Vec<f64> = grid.iter().map(|&v| 0.5 + v as f64 / 500.0).collect();
            let short: Vec<f64> = grid.iter().rev().map(|&v| 0.5 + v as f64 / 500.0).collect();
            let t = table_with_ratios(&u, 10, 3, &long, &short);
            let cfg = RttConfig {
                long_horizon_days: 10,
                short_horizon_days: 3,
                ..RttConfig::default()
            };
            let r = rtt_weights(&t, t.n_dates(), &cfg).unwrap();
            prop_assert!((r.weights.net() - 1.0).abs() < 1e-12);
            prop_assert!(r.weights.values().iter().all(|w| *w >= 0.0));
            // Only stocks are ever held.
            for i in n_stocks..n {
                prop_assert_eq!(r.weights.get(i), 0.0);
            }
        }
    }
}
