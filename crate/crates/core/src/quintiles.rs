//! Cross-sectional ranking and quintile assignment.
//!
//! Each period every asset is ranked by realized return (ascending, ties
//! broken by universe order) and rank r of n maps to quintile
//! ceil(5r / n), so quintile 1 holds the worst performers and quintile 5
//! the best. Bucket sizes differ by at most one when n is not a multiple
//! of five.

use std::io::{BufWriter, Write};

use crate::error::{Error, Result};
use crate::market_data::{AssetClass, AssetUniverse};

/// Number of rank buckets used throughout the crate.
pub const QUINTILE_COUNT: usize = 5;

/// Ascending ranks (1-based) of a cross-section, one per asset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector {
    ranks: Vec<usize>,
}

impl RankVector {
    /// Wraps explicit ranks, checking they form a permutation of 1..=n.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        if n == 0 {
            return Err(Error::EmptyInput {
                context: "no ranks".into(),
            });
        }
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r < 1 || r > n || seen[r - 1] {
                return Err(Error::NotAPermutation);
            }
            seen[r - 1] = true;
        }
        Ok(RankVector { ranks })
    }

    pub fn n(&self) -> usize {
        self.ranks.len()
    }

    /// 1-based rank of asset `i` (1 = smallest value).
    pub fn rank(&self, i: usize) -> usize {
        self.ranks[i]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }
}

/// Ranks a cross-section of values ascending; ties go to the earlier asset
/// in universe order, so the result is always a total order.
pub fn rank_assets(values: &[f64], universe: &AssetUniverse) -> Result<RankVector> {
    if values.len() != universe.len() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "{} values for {} assets",
                values.len(),
                universe.len()
            ),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyInput {
            context: "no values to rank".into(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable sort on value alone: equal values keep universe order.
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0usize; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ok(RankVector { ranks })
}

/// Quintile (1..=5) of rank `r` among `n`: ceil(5r / n).
pub fn quintile_of_rank(r: usize, n: usize) -> usize {
    assert!(n >= 1 && r >= 1 && r <= n, "rank out of range");
    (QUINTILE_COUNT * r + n - 1) / n
}

/// Realized quintile of every asset in one period, stored as indices with
/// one-hot views on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuintileOutcome {
    quintile: Vec<u8>, // 1..=5 per asset
}

impl QuintileOutcome {
    /// Wraps explicit quintile indices, checking range and balance: bucket
    /// counts may differ by at most one, and must be exactly n/5 when n is
    /// divisible by five.
    pub fn from_quintile_indices(quintile: Vec<u8>) -> Result<Self> {
        if quintile.is_empty() {
            return Err(Error::EmptyInput {
                context: "no quintile assignments".into(),
            });
        }
        let mut counts = [0usize; QUINTILE_COUNT];
        for &q in &quintile {
            if q < 1 || q as usize > QUINTILE_COUNT {
                return Err(Error::MalformedRow {
                    line: 0,
                    reason: format!("quintile {q} out of 1..=5"),
                });
            }
            counts[q as usize - 1] += 1;
        }
        let n = quintile.len();
        let max = *counts.iter().max().unwrap();
        let min = *counts.iter().min().unwrap();
        let balanced = if n % QUINTILE_COUNT == 0 {
            counts.iter().all(|&c| c == n / QUINTILE_COUNT)
        } else {
            max - min <= 1
        };
        if !balanced {
            return Err(Error::UnbalancedOutcome { counts });
        }
        Ok(QuintileOutcome { quintile })
    }

    pub fn n_assets(&self) -> usize {
        self.quintile.len()
    }

    /// Quintile index (1..=5) of asset `i`.
    pub fn quintile(&self, i: usize) -> u8 {
        self.quintile[i]
    }

    /// One-hot probability row for asset `i`.
    pub fn onehot(&self, i: usize) -> [f64; QUINTILE_COUNT] {
        let mut row = [0.0; QUINTILE_COUNT];
        row[self.quintile[i] as usize - 1] = 1.0;
        row
    }

    /// How many assets landed in each quintile.
    pub fn counts(&self) -> [usize; QUINTILE_COUNT] {
        let mut counts = [0usize; QUINTILE_COUNT];
        for &q in &self.quintile {
            counts[q as usize - 1] += 1;
        }
        counts
    }
}

/// Maps a rank cross-section to its quintile outcome.
pub fn quintile_outcome(ranks: &RankVector) -> Result<QuintileOutcome> {
    let n = ranks.n();
    let quintile = ranks
        .ranks()
        .iter()
        .map(|&r| quintile_of_rank(r, n) as u8)
        .collect();
    // Construction from a permutation is balanced by the ceiling formula;
    // the validating constructor double-checks for free.
    QuintileOutcome::from_quintile_indices(quintile)
}

/// Which assets an occupancy histogram aggregates over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OccupancySelector {
    All,
    Class(AssetClass),
    Asset(String),
}

/// Empirical distribution over quintiles for a set of assets across periods.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyHistogram {
    probs: [f64; QUINTILE_COUNT],
    n_observations: usize,
}

impl OccupancyHistogram {
    pub fn probs(&self) -> &[f64; QUINTILE_COUNT] {
        &self.probs
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    /// Mass in the two extreme quintiles (1 and 5).
    pub fn extreme_mass(&self) -> f64 {
        self.probs[0] + self.probs[QUINTILE_COUNT - 1]
    }
}

/// Pools quintile hits over all periods for the selected assets and
/// normalizes to a probability vector.
pub fn occupancy(
    outcomes: &[QuintileOutcome],
    universe: &AssetUniverse,
    selector: &OccupancySelector,
) -> Result<OccupancyHistogram> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput {
            context: "no outcome periods".into(),
        });
    }
    let selected: Vec<usize> = match selector {
        OccupancySelector::All => (0..universe.len()).collect(),
        OccupancySelector::Class(c) => universe.class_indices(*c),
        OccupancySelector::Asset(id) => universe.position(id).into_iter().collect(),
    };
    if selected.is_empty() {
        return Err(Error::EmptySelection {
            context: format!("{selector:?}"),
        });
    }
    let mut counts = [0usize; QUINTILE_COUNT];
    for (t, o) in outcomes.iter().enumerate() {
        if o.n_assets() != universe.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "outcome {t} covers {} assets, universe has {}",
                    o.n_assets(),
                    universe.len()
                ),
            });
        }
        for &i in &selected {
            counts[o.quintile(i) as usize - 1] += 1;
        }
    }
    let total = (outcomes.len() * selected.len()) as f64;
    let mut probs = [0.0; QUINTILE_COUNT];
    for k in 0..QUINTILE_COUNT {
        probs[k] = counts[k] as f64 / total;
    }
    Ok(OccupancyHistogram {
        probs,
        n_observations: outcomes.len() * selected.len(),
    })
}

/// Writes realized outcomes as `period,asset_id,q1,q2,q3,q4,q5` with one-hot
/// rows, period-major then universe order.
pub fn write_outcomes_csv<W: Write>(
    outcomes: &[QuintileOutcome],
    universe: &AssetUniverse,
    writer: &mut W,
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "period,asset_id,q1,q2,q3,q4,q5")?;
    for (t, o) in outcomes.iter().enumerate() {
        if o.n_assets() != universe.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "outcome {t} covers {} assets, universe has {}",
                    o.n_assets(),
                    universe.len()
                ),
            });
        }
        for i in 0..universe.len() {
            let row = o.onehot(i);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Asset;
    use proptest::prelude::*;

    fn universe_of(n: usize) -> AssetUniverse {
        AssetUniverse::new(
            (0..n)
                .map(|i| Asset {
                    id: format!("A{i:03}"),
                    class: AssetClass::Stock,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ranks_ascend_with_value() {
        let u = universe_of(4);
        let r = rank_assets(&[0.3, -0.1, 0.7, 0.0], &u).unwrap();
        assert_eq!(r.ranks(), &[3, 1, 4, 2]);
    }

    #[test]
    fn ties_go_to_earlier_asset() {
        let u = universe_of(3);
        let r = rank_assets(&[0.5, 0.5, 0.1], &u).unwrap();
        assert_eq!(r.ranks(), &[2, 3, 1]);
    }

    #[test]
    fn rank_rejects_bad_input() {
        let u = universe_of(3);
        assert!(matches!(
            rank_assets(&[0.1, 0.2], &u),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            rank_assets(&[0.1, f64::NAN, 0.2], &u),
            Err(Error::NonFiniteValue)
        ));
    }

    #[test]
    fn quintile_boundaries_at_n_100() {
        assert_eq!(quintile_of_rank(1, 100), 1);
        assert_eq!(quintile_of_rank(20, 100), 1);
        assert_eq!(quintile_of_rank(21, 100), 2);
        assert_eq!(quintile_of_rank(40, 100), 2);
        assert_eq!(quintile_of_rank(41, 100), 3);
        assert_eq!(quintile_of_rank(80, 100), 4);
        assert_eq!(quintile_of_rank(81, 100), 5);
        assert_eq!(quintile_of_rank(100, 100), 5);
    }

    #[test]
    fn quintiles_for_tiny_universes() {
        // n = 3: ranks 1,2,3 land in quintiles 2,4,5.
        assert_eq!(quintile_of_rank(1, 3), 2);
        assert_eq!(quintile_of_rank(2, 3), 4);
        assert_eq!(quintile_of_rank(3, 3), 5);
        // n = 6: bucket sizes 1,1,1,1,2.
        let ranks = RankVector::from_ranks((1..=6).collect()).unwrap();
        let o = quintile_outcome(&ranks).unwrap();
        assert_eq!(o.counts(), [1, 1, 1, 1, 2]);
    }

    #[test]
    fn outcome_balanced_for_n_100() {
        let u = universe_of(100);
        let values: Vec<f64> = (0..100).map(|i| (i as f64) * 0.01 - 0.5).collect();
        let ranks = rank_assets(&values, &u).unwrap();
        let o = quintile_outcome(&ranks).unwrap();
        assert_eq!(o.counts(), [20; 5]);
        assert_eq!(o.quintile(0), 1);
        assert_eq!(o.quintile(99), 5);
        assert_eq!(o.onehot(99), [0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn explicit_indices_validate_balance() {
        assert!(QuintileOutcome::from_quintile_indices(vec![1, 2, 3, 4, 5]).is_ok());
        let err = QuintileOutcome::from_quintile_indices(vec![1, 1, 3, 4, 5]).unwrap_err();
        assert!(matches!(err, Error::UnbalancedOutcome { .. }));
        let err = QuintileOutcome::from_quintile_indices(vec![0, 2, 3, 4, 5]).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { .. }));
        // n = 6 with counts (2,1,1,1,1) differs by one -> allowed.
        assert!(QuintileOutcome::from_quintile_indices(vec![1, 1, 2, 3, 4, 5]).is_ok());
    }

    #[test]
    fn rank_vector_validates_permutation() {
        assert!(RankVector::from_ranks(vec![2, 1, 3]).is_ok());
        assert!(matches!(
            RankVector::from_ranks(vec![1, 1, 3]),
            Err(Error::NotAPermutation)
        ));
        assert!(matches!(
            RankVector::from_ranks(vec![0, 1, 2]),
            Err(Error::NotAPermutation)
        ));
    }

    #[test]
    fn occupancy_pools_periods_and_selects_classes() {
        let u = AssetUniverse::new(vec![
            Asset {
                id: "S1".into(),
                class: AssetClass::Stock,
            },
            Asset {
                id: "S2".into(),
                class: AssetClass::Stock,
            },
            Asset {
                id: "E1".into(),
                class: AssetClass::Etf,
            },
            Asset {
                id: "E2".into(),
                class: AssetClass::Etf,
            },
            Asset {
                id: "E3".into(),
                class: AssetClass::Etf,
            },
        ])
        .unwrap();
        // Two periods; stocks sit in the extremes both times.
        let o1 = QuintileOutcome::from_quintile_indices(vec![1, 5, 2, 3, 4]).unwrap();
        let o2 = QuintileOutcome::from_quintile_indices(vec![5, 1, 4, 3, 2]).unwrap();
        let outcomes = vec![o1, o2];

        let stocks = occupancy(&outcomes, &u, &OccupancySelector::Class(AssetClass::Stock))
            .unwrap();
        assert_eq!(stocks.extreme_mass(), 1.0);
        assert_eq!(stocks.n_observations(), 4);

        let etfs = occupancy(&outcomes, &u, &OccupancySelector::Class(AssetClass::Etf)).unwrap();
        assert_eq!(etfs.extreme_mass(), 0.0);
        assert!((etfs.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let one = occupancy(&outcomes, &u, &OccupancySelector::Asset("S1".into())).unwrap();
        assert_eq!(one.probs(), &[0.5, 0.0, 0.0, 0.0, 0.5]);

        assert!(matches!(
            occupancy(&outcomes, &u, &OccupancySelector::Asset("ZZ".into())),
            Err(Error::EmptySelection { .. })
        ));
        assert!(matches!(
            occupancy(&[], &u, &OccupancySelector::All),
            Err(Error::EmptyInput { .. })
        ));
    }

    proptest! {
        #[test]
        fn ranks_form_permutation(values in proptest::collection::vec(-1.0f64..1.0, 1..60)) {
            let u = universe_of(values.len());
            let r = rank_assets(&values, &u).unwrap();
            prop_assert!(RankVector::from_ranks(r.ranks().to_vec()).is_ok());
        }

        #[test]
        fn quintile_counts_balanced(values in proptest::collection::vec(-1.0f64..1.0, 1..60)) {
            let u = universe_of(values.len());
            let r = rank_assets(&values, &u).unwrap();
            let o = quintile_outcome(&r).unwrap();
            let counts = o.counts();
            let max = counts.iter().max().unwrap();
            let min = counts.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            if values.len() % 5 == 0 {
                prop_assert!(counts.iter().all(|&c| c == values.len() / 5));
            }
        }

        #[test]
        fn monotone_transform_preserves_quintiles(
            grid in proptest::collection::vec(-1000i32..1000, 2..60),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            // Integer grid keeps ties exact and gaps far above float noise.
            let values: Vec<f64> = grid.iter().map(|&v| v as f64).collect();
            let u = universe_of(values.len());
            let transformed: Vec<f64> = values.iter().map(|v| v * scale + shift).collect();
            let a = quintile_outcome(&rank_assets(&values, &u).unwrap()).unwrap();
            let b = quintile_outcome(&rank_assets(&transformed, &u).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
