//! Ranked probability scoring of quintile forecasts.
//!
//! For one asset in one period with forecast row f and realized one-hot row
//! q, the score is the mean squared gap between the cumulative vectors:
//!
//! rps = (1/5) * sum_j (cumsum(q)_j - cumsum(f)_j)^2
//!
//! It is 0 for a certain, correct forecast and at most 0.8 (certain forecast
//! in the opposite extreme quintile). A uniform forecast scores exactly 0.16
//! against any balanced cross-section. Aggregation is the plain mean over
//! all (asset, period) cells, summed in fixed period-major order so results
//! are reproducible bit for bit.

use std::collections::BTreeMap;

use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecast::ForecastMatrix;
use crate::quintiles::{QuintileOutcome, QUINTILE_COUNT};

const VALIDATION_TOL: f64 = 1e-9;

fn validate_onehot(q: &[f64; QUINTILE_COUNT], index: usize) -> Result<()> {
    let mut ones = 0;
    for &v in q {
        if (v - 1.0).abs() <= VALIDATION_TOL {
            ones += 1;
        } else if v.abs() > VALIDATION_TOL {
            return Err(Error::NotOneHot { index });
        }
    }
    if ones != 1 {
        return Err(Error::NotOneHot { index });
    }
    Ok(())
}

fn validate_simplex(f: &[f64; QUINTILE_COUNT], index: usize) -> Result<()> {
    let ok = f.iter().all(|p| p.is_finite() && *p >= -VALIDATION_TOL && *p <= 1.0 + VALIDATION_TOL)
        && (f.iter().sum::<f64>() - 1.0).abs() <= VALIDATION_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::NotASimplex { index })
    }
}

/// Score of a single forecast row against a single one-hot outcome row.
pub fn rps_asset(q: &[f64; QUINTILE_COUNT], f: &[f64; QUINTILE_COUNT]) -> Result<f64> {
    validate_onehot(q, 0)?;
    validate_simplex(f, 0)?;
    Ok(rps_unchecked(q, f))
}

fn rps_unchecked(q: &[f64; QUINTILE_COUNT], f: &[f64; QUINTILE_COUNT]) -> f64 {
    let mut cq = 0.0;
    let mut cf = 0.0;
    let mut acc = 0.0;
    for k in 0..QUINTILE_COUNT {
        cq += q[k];
        cf += f[k];
        let d = cq - cf;
        acc += d * d;
    }
    acc / QUINTILE_COUNT as f64
}

/// Per-asset scores for one period.
pub fn rps_matrix(outcome: &QuintileOutcome, forecast: &ForecastMatrix) -> Result<Vec<f64>> {
    if outcome.n_assets() != forecast.n_assets() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "outcome covers {} assets, forecast {}",
                outcome.n_assets(),
                forecast.n_assets()
            ),
        });
    }
    Ok((0..outcome.n_assets())
        .map(|i| rps_unchecked(&outcome.onehot(i), forecast.row(i)))
        .collect())
}

fn check_series_shapes(
    outcomes: &[QuintileOutcome],
    forecasts: &[ForecastMatrix],
) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput {
            context: "no periods to score".into(),
        });
    }
    if outcomes.len() != forecasts.len() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "{} outcome periods vs {} forecast periods",
                outcomes.len(),
                forecasts.len()
            ),
        });
    }
    for (t, (o, f)) in outcomes.iter().zip(forecasts).enumerate() {
        if o.n_assets() != f.n_assets() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "period {t}: outcome covers {} assets, forecast {}",
                    o.n_assets(),
                    f.n_assets()
                ),
            });
        }
    }
    Ok(())
}

/// Mean score per period (averaged over assets).
pub fn per_period_rps(
    outcomes: &[QuintileOutcome],
    forecasts: &[ForecastMatrix],
) -> Result<Vec<f64>> {
    check_series_shapes(outcomes, forecasts)?;
    let mut out = Vec::with_capacity(outcomes.len());
    for (o, f) in outcomes.iter().zip(forecasts) {
        let scores = rps_matrix(o, f)?;
        out.push(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    Ok(out)
}

/// Mean score over every (asset, period) cell.
pub fn rps_aggregate(
    outcomes: &[QuintileOutcome],
    forecasts: &[ForecastMatrix],
) -> Result<f64> {
    check_series_shapes(outcomes, forecasts)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (o, f) in outcomes.iter().zip(forecasts) {
        for s in rps_matrix(o, f)? {
            sum += s;
        }
        count += o.n_assets();
    }
    Ok(sum / count as f64)
}

/// One point of a rolling mean: the window ending at `period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RollingPoint {
    pub period: usize,
    pub value: f64,
}

/// Rolling mean of a per-period series. The first point appears once a full
/// window is available, labelled with the period it ends on.
pub fn rolling_rps(per_period: &[f64], window: usize) -> Result<Vec<RollingPoint>> {
    if window == 0 || window > per_period.len() {
        return Err(Error::BadWindow {
            window,
            len: per_period.len(),
        });
    }
    let inv = 1.0 / window as f64;
    Ok((window - 1..per_period.len())
        .map(|t| {
            let sum: f64 = per_period[t + 1 - window..=t].iter().sum();
            RollingPoint {
                period: t,
                value: sum * inv,
            }
        })
        .collect())
}

/// Full scoring summary for one forecaster over one outcome series.
#[derive(Debug, Clone, PartialEq)]
pub struct RpsReport {
    pub aggregate: f64,
    pub per_period: Vec<f64>,
    /// Row-per-period, column-per-asset scores.
    pub per_asset: Vec<Vec<f64>>,
    /// Rolling means keyed by window length.
    pub rolling: BTreeMap<usize, Vec<RollingPoint>>,
    /// Requested windows longer than the series, reported rather than scored.
    pub skipped_windows: Vec<usize>,
}

/// Scores a forecast series and assembles per-period, per-asset, and rolling
/// views. Windows longer than the series are skipped and recorded; a zero
/// window is rejected outright.
pub fn rps_report(
    outcomes: &[QuintileOutcome],
    forecasts: &[ForecastMatrix],
    windows: &[usize],
) -> Result<RpsReport> {
    check_series_shapes(outcomes, forecasts)?;
    let per_asset: Vec<Vec<f64>> = outcomes
        .iter()
        .zip(forecasts)
        .map(|(o, f)| rps_matrix(o, f))
        .collect::<Result<_>>()?;
    let per_period: Vec<f64> = per_asset
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let aggregate = rps_aggregate(outcomes, forecasts)?;
    let mut rolling = BTreeMap::new();
    let mut skipped = Vec::new();
    for &w in windows {
        if w == 0 {
            return Err(Error::BadWindow {
                window: 0,
                len: per_period.len(),
            });
        }
        if w > per_period.len() {
            skipped.push(w);
        } else {
            rolling.insert(w, rolling_rps(&per_period, w)?);
        }
    }
    Ok(RpsReport {
        aggregate,
        per_period,
        per_asset,
        rolling,
        skipped_windows: skipped,
    })
}

/// Split of the mean score into calibration and noise parts.
///
/// With F the cumulative forecast vector, Q the cumulative outcome vector,
/// m = sample mean of F and e = F - m:
///
/// * bias        = (1/5) sum_j mean((Q_j - m_j)^2)
/// * correlation = (2/5) sum_j mean(Q_j * e_j)
/// * variance    = (1/5) sum_j mean(e_j^2)
///
/// and mean_rps = bias - correlation + variance exactly. Deviating from the
/// mean forecast only pays when the covariance with outcomes beats half the
/// deviation's own variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpsDecomposition {
    pub bias: f64,
    pub correlation: f64,
    pub variance: f64,
    pub mean_rps: f64,
}

pub fn decompose_rps(
    q_rows: &[[f64; QUINTILE_COUNT]],
    f_rows: &[[f64; QUINTILE_COUNT]],
) -> Result<RpsDecomposition> {
    if q_rows.len() != f_rows.len() {
        return Err(Error::ShapeMismatch {
            context: format!("{} outcome rows vs {} forecast rows", q_rows.len(), f_rows.len()),
        });
    }
    if q_rows.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            have: q_rows.len(),
        });
    }
    for (i, (q, f)) in q_rows.iter().zip(f_rows).enumerate() {
        validate_onehot(q, i)?;
        validate_simplex(f, i)?;
    }

    let n = q_rows.len() as f64;
    let cum = |row: &[f64; QUINTILE_COUNT]| {
        let mut c = [0.0; QUINTILE_COUNT];
        let mut acc = 0.0;
        for k in 0..QUINTILE_COUNT {
            acc += row[k];
            c[k] = acc;
        }
        c
    };
    let qc: Vec<[f64; QUINTILE_COUNT]> = q_rows.iter().map(&cum).collect();
    let fc: Vec<[f64; QUINTILE_COUNT]> = f_rows.iter().map(&cum).collect();

    let mut mean_f = [0.0; QUINTILE_COUNT];
    for f in &fc {
        for j in 0..QUINTILE_COUNT {
            mean_f[j] += f[j];
        }
    }
    for m in &mut mean_f {
        *m /= n;
    }

    let (mut bias, mut corr, mut var) = (0.0, 0.0, 0.0);
    for j in 0..QUINTILE_COUNT {
        let (mut b, mut c, mut v) = (0.0, 0.0, 0.0);
        for (q, f) in qc.iter().zip(&fc) {
            let e = f[j] - mean_f[j];
            let d = q[j] - mean_f[j];
            b += d * d;
            c += q[j] * e;
            v += e * e;
        }
        bias += b / n;
        corr += c / n;
        var += v / n;
    }
    let k = QUINTILE_COUNT as f64;
    let mut mean_rps = 0.0;
    for (q, f) in q_rows.iter().zip(f_rows) {
        mean_rps += rps_unchecked(q, f);
    }
    Ok(RpsDecomposition {
        bias: bias / k,
        correlation: 2.0 * corr / k,
        variance: var / k,
        mean_rps: mean_rps / n,
    })
}

/// Column mean of a set of one-hot outcome rows: the constant forecast that
/// minimizes the mean score over those rows.
pub fn mean_forecast(q_rows: &[[f64; QUINTILE_COUNT]]) -> Result<[f64; QUINTILE_COUNT]> {
    if q_rows.is_empty() {
        return Err(Error::EmptyInput {
            context: "no outcome rows".into(),
        });
    }
    for (i, q) in q_rows.iter().enumerate() {
        validate_onehot(q, i)?;
    }
    let n = q_rows.len() as f64;
    let mut mean = [0.0; QUINTILE_COUNT];
    for q in q_rows {
        for k in 0..QUINTILE_COUNT {
            mean[k] += q[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Result of pitting the mean forecast against random challengers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityCheck {
    /// True when no challenger beat the mean forecast beyond float noise.
    pub holds: bool,
    /// Smallest (challenger - mean) score gap seen; negative would mean a win.
    pub worst_margin: f64,
}

/// Checks empirically that the column-mean forecast minimizes mean score:
/// draws `n_challengers` random probability rows and compares each against
/// the mean forecast on the same outcome rows.
pub fn check_mean_optimality(
    q_rows: &[[f64; QUINTILE_COUNT]],
    n_challengers: usize,
    seed: u64,
) -> Result<OptimalityCheck> {
    let best = mean_forecast(q_rows)?;
    let mean_score = |f: &[f64; QUINTILE_COUNT]| {
        q_rows.iter().map(|q| rps_unchecked(q, f)).sum::<f64>() / q_rows.len() as f64
    };
    let base = mean_score(&best);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..n_challengers {
        let challenger = sample_simplex(&mut rng);
        let margin = mean_score(&challenger) - base;
        if margin < worst {
            worst = margin;
        }
    }
    Ok(OptimalityCheck {
        holds: worst >= -1e-12,
        worst_margin: worst,
    })
}

/// Uniform draw from the probability simplex (normalized unit exponentials).
fn sample_simplex(rng: &mut impl RngCore) -> [f64; QUINTILE_COUNT] {
    let mut g = [0.0; QUINTILE_COUNT];
    let mut sum = 0.0;
    for v in &mut g {
        // (0, 1] so the log is always finite.
        let u = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        *v = -u.ln();
        sum += *v;
    }
    if sum == 0.0 {
        return [1.0 / QUINTILE_COUNT as f64; QUINTILE_COUNT];
    }
    for v in &mut g {
        *v /= sum;
    }
    g
}
