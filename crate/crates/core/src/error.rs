//! Error type shared by every module in the crate.

use chrono::NaiveDate;
use thiserror::Error;

/// Anything that can go wrong while loading data, building forecasts,
/// scoring them, or running a backtest.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: unknown asset id {id:?}")]
    UnknownAsset { line: u64, id: String },

    #[error("line {line}: duplicate close for {id:?} on {date}")]
    DuplicatePrice {
        line: u64,
        id: String,
        date: NaiveDate,
    },

    #[error("line {line}: close must be finite and positive, got {value}")]
    BadPrice { line: u64, value: f64 },

    #[error("duplicate asset id {id:?} in universe")]
    DuplicateAsset { id: String },

    #[error("universe has no assets")]
    EmptyUniverse,

    #[error("no date has a close for every asset")]
    EmptyDateIntersection,

    #[error("period length must be at least 1")]
    BadPeriodLength,

    #[error("not enough return days for one full period: have {have}, need {need}")]
    NoFullPeriod { have: usize, need: usize },

    #[error("insufficient history: need {need} prior days, have {have}")]
    InsufficientHistory { need: usize, have: usize },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("values must be finite")]
    NonFiniteValue,

    #[error("ranks are not a permutation of 1..=n")]
    NotAPermutation,

    #[error("quintile counts are unbalanced: {counts:?}")]
    UnbalancedOutcome { counts: [usize; 5] },

    #[error("selection matches no assets: {context}")]
    EmptySelection { context: String },

    #[error("empty input: {context}")]
    EmptyInput { context: String },

    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },

    #[error("forecast row {index} is not a probability vector")]
    NotASimplex { index: usize },

    #[error("outcome row {index} is not one-hot")]
    NotOneHot { index: usize },

    #[error("rolling window must lie in 1..={len}, got {window}")]
    BadWindow { window: usize, len: usize },

    #[error("need at least {need} samples, got {have}")]
    TooFewSamples { need: usize, have: usize },

    #[error("zero volatility with nonzero cumulative return")]
    ZeroVolatility,

    #[error("log return undefined: portfolio lost its whole value on day {day} (return {value})")]
    LogUndefined { day: usize, value: f64 },

    #[error("invalid range: {context}")]
    BadRange { context: String },
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!("is_io_error guaranteed an io kind"),
            }
        } else {
            Error::MalformedRow {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                reason: e.to_string(),
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
