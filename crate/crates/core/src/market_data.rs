//! Market data ingestion and calendar construction.
//!
//! Input is a long-format CSV of daily closes (`date,asset_id,close`) plus a
//! universe CSV (`asset_id,class`). Only dates where *every* universe asset
//! has a close are kept, so downstream code can assume a dense date × asset
//! grid. Time is then carved into non-overlapping periods of `period_len`
//! return days each; a trailing partial period is dropped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Coarse asset classification used by the class-conditional forecaster and
/// the short leg of compensated portfolios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssetClass {
    Stock,
    Etf,
}

impl std::fmt::Display for AssetClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssetClass::Stock => write!(f, "Stock"),
            AssetClass::Etf => write!(f, "ETF"),
        }
    }
}

impl std::str::FromStr for AssetClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stock" => Ok(AssetClass::Stock),
            "etf" => Ok(AssetClass::Etf),
            other => Err(format!("unknown asset class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub id: String,
    pub class: AssetClass,
}

/// Ordered set of assets. The file order is preserved and doubles as the
/// tie-break order wherever assets are ranked.
#[derive(Debug, Clone)]
pub struct AssetUniverse {
    assets: Vec<Asset>,
    index: HashMap<String, usize>,
}

impl AssetUniverse {
    pub fn new(assets: Vec<Asset>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        let mut index = HashMap::with_capacity(assets.len());
        for (i, a) in assets.iter().enumerate() {
            if a.id.is_empty() {
                return Err(Error::MalformedRow {
                    line: 0,
                    reason: "empty asset id".into(),
                });
            }
            if index.insert(a.id.clone(), i).is_some() {
                return Err(Error::DuplicateAsset { id: a.id.clone() });
            }
        }
        Ok(AssetUniverse { assets, index })
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn asset(&self, i: usize) -> &Asset {
        &self.assets[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Asset> {
        self.assets.iter()
    }

    /// Position of `id` in universe order, if present.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Indices of all assets of the given class, in universe order.
    pub fn class_indices(&self, class: AssetClass) -> Vec<usize> {
        self.assets
            .iter()
            .enumerate()
            .filter(|(_, a)| a.class == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_of_class(&self, class: AssetClass) -> usize {
        self.assets.iter().filter(|a| a.class == class).count()
    }
}

/// Dense date × asset grid of daily closes, restricted to dates covered by
/// every asset.
#[derive(Debug, Clone)]
pub struct PriceTable {
    universe: AssetUniverse,
    dates: Vec<NaiveDate>,
    values: Vec<f64>, // row-major: dates × assets
    dropped_dates: usize,
    rows_read: usize,
}

impl PriceTable {
    /// Builds a table from already-aligned parts. `values` is row-major with
    /// one row per date and one column per universe asset.
    pub fn from_parts(
        universe: AssetUniverse,
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::EmptyInput {
                context: "price table has no dates".into(),
            });
        }
        if values.len() != dates.len() * universe.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "expected {} closes ({} dates x {} assets), got {}",
                    dates.len() * universe.len(),
                    dates.len(),
                    universe.len(),
                    values.len()
                ),
            });
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedRow {
                line: 0,
                reason: "dates are not strictly increasing".into(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::BadPrice {
                line: 0,
                value: *bad,
            });
        }
        let rows_read = values.len();
        Ok(PriceTable {
            universe,
            dates,
            values,
            dropped_dates: 0,
            rows_read,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.universe.len()
    }

    pub fn price(&self, day: usize, asset: usize) -> f64 {
        self.values[day * self.universe.len() + asset]
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.dates[day]
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn universe(&self) -> &AssetUniverse {
        &self.universe
    }

    /// Dates present in the input but discarded because at least one asset
    /// had no close there.
    pub fn dropped_dates(&self) -> usize {
        self.dropped_dates
    }

    /// Number of data rows consumed from the source CSV.
    pub fn rows_read(&self) -> usize {
        self.rows_read
    }
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok = record.len() == expected.len()
        && record
            .iter()
            .zip(expected)
            .all(|(got, want)| got.trim().eq_ignore_ascii_case(want));
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedRow {
            line: 1,
            reason: format!(
                "expected header {:?}, got {:?}",
                expected.join(","),
                record.iter().collect::<Vec<_>>().join(",")
            ),
        })
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads a `asset_id,class` CSV. File order becomes universe order.
pub fn load_universe<R: Read>(reader: R) -> Result<AssetUniverse> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &["asset_id", "class"])?;
    let mut assets = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty asset id".into(),
            });
        }
        let class: AssetClass = record[1]
            .parse()
            .map_err(|reason| Error::MalformedRow { line, reason })?;
        assets.push(Asset { id, class });
    }
    AssetUniverse::new(assets)
}

pub fn load_universe_path<P: AsRef<Path>>(path: P) -> Result<AssetUniverse> {
    load_universe(BufReader::new(File::open(path)?))
}

/// Reads a long-format `date,asset_id,close` CSV against a known universe.
///
/// Dates where any universe asset is missing are dropped; the count of
/// dropped dates is kept on the resulting table for reporting.
pub fn load_prices<R: Read>(reader: R, universe: &AssetUniverse) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &["date", "asset_id", "close"])?;

    let n = universe.len();
    // BTreeMap keeps dates sorted, which fixes the output row order.
    let mut by_date: std::collections::BTreeMap<NaiveDate, Vec<Option<f64>>> =
        std::collections::BTreeMap::new();
    let mut rows_read = 0usize;

    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
            Error::MalformedRow {
                line,
                reason: format!("bad date {:?}: {e}", &record[0]),
            }
        })?;
        let id = &record[1];
        let asset = universe.position(id).ok_or_else(|| Error::UnknownAsset {
            line,
            id: id.to_string(),
        })?;
        let close: f64 = record[2].parse().map_err(|e| Error::MalformedRow {
            line,
            reason: format!("bad close {:?}: {e}", &record[2]),
        })?;
        if !close.is_finite() || close <= 0.0 {
            return Err(Error::BadPrice { line, value: close });
        }
        let row = by_date.entry(date).or_insert_with(|| vec![None; n]);
        if row[asset].is_some() {
            return Err(Error::DuplicatePrice {
                line,
                id: id.to_string(),
                date,
            });
        }
        row[asset] = Some(close);
        rows_read += 1;
    }

    let total_dates = by_date.len();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (date, row) in by_date {
        if row.iter().all(Option::is_some) {
            dates.push(date);
            values.extend(row.into_iter().map(Option::unwrap));
        }
    }
    if dates.is_empty() {
        return Err(Error::EmptyDateIntersection);
    }
    let dropped = total_dates - dates.len();
    let mut table = PriceTable::from_parts(universe.clone(), dates, values)?;
    table.dropped_dates = dropped;
    table.rows_read = rows_read;
    Ok(table)
}

pub fn load_prices_path<P: AsRef<Path>>(path: P, universe: &AssetUniverse) -> Result<PriceTable> {
    load_prices(BufReader::new(File::open(path)?), universe)
}

/// Writes the universe back out as `asset_id,class`.
pub fn write_universe_csv<W: Write>(universe: &AssetUniverse, writer: &mut W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "asset_id,class")?;
    for a in universe.iter() {
        writeln!(w, "{},{}", a.id, a.class)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the dense table back out in long format, date-major then universe
/// order. Closes use the shortest decimal that round-trips, so a write/load
/// cycle is lossless.
pub fn write_prices_csv<W: Write>(table: &PriceTable, writer: &mut W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "date,asset_id,close")?;
    for day in 0..table.n_dates() {
        for i in 0..table.n_assets() {
            writeln!(
                w,
                "{},{},{}",
                table.date(day),
                table.universe().asset(i).id,
                table.price(day, i)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One evaluation period: a contiguous block of return days.
///
/// `start_day..=end_day` are indices into the table's date axis; the period
/// return compounds daily moves from the close on `start_day - 1` to the
/// close on `end_day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Period {
    pub index: usize,
    pub start_day: usize,
    pub end_day: usize,
}

/// Non-overlapping periods of equal length covering the table's date axis.
#[derive(Debug, Clone)]
pub struct PeriodCalendar {
    periods: Vec<Period>,
    period_len: usize,
}

impl PeriodCalendar {
    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn period_len(&self) -> usize {
        self.period_len
    }

    pub fn period(&self, t: usize) -> &Period {
        &self.periods[t]
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn first_return_day(&self) -> usize {
        self.periods[0].start_day
    }

    pub fn last_return_day(&self) -> usize {
        self.periods[self.periods.len() - 1].end_day
    }
}

/// Carves the table's dates into periods of `period_len` return days,
/// starting at the second date (the first date only provides a base close).
/// A trailing partial period is dropped.
pub fn build_calendar(table: &PriceTable, period_len: usize) -> Result<PeriodCalendar> {
    build_calendar_with_warmup(table, period_len, 0)
}

/// Like [`build_calendar`] but reserves the first `warmup_days` return days
/// for history-hungry consumers (e.g. trailing price ratios), so period 0
/// starts at date index `warmup_days + 1`.
pub fn build_calendar_with_warmup(
    table: &PriceTable,
    period_len: usize,
    warmup_days: usize,
) -> Result<PeriodCalendar> {
    if period_len == 0 {
        return Err(Error::BadPeriodLength);
    }
    let return_days = (table.n_dates() - 1).saturating_sub(warmup_days);
    let n_periods = return_days / period_len;
    if n_periods == 0 {
        return Err(Error::NoFullPeriod {
            have: return_days,
            need: period_len,
        });
    }
    let periods = (0..n_periods)
        .map(|t| Period {
            index: t,
            start_day: warmup_days + t * period_len + 1,
            end_day: warmup_days + (t + 1) * period_len,
        })
        .collect();
    Ok(PeriodCalendar {
        periods,
        period_len,
    })
}

/// Per-period simple returns, row-major: periods × assets.
#[derive(Debug, Clone)]
pub struct ReturnTable {
    values: Vec<f64>,
    n_assets: usize,
}

impl ReturnTable {
    pub fn n_periods(&self) -> usize {
        self.values.len() / self.n_assets
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn value(&self, period: usize, asset: usize) -> f64 {
        self.values[period * self.n_assets + asset]
    }

    pub fn row(&self, period: usize) -> &[f64] {
        &self.values[period * self.n_assets..(period + 1) * self.n_assets]
    }
}

/// Simple return of each asset over each calendar period:
/// close(end_day) / close(start_day - 1) - 1, which compounds the daily
/// moves inside the period exactly.
///
/// # Panics
/// If the calendar was built for a different table shape.
pub fn period_returns(table: &PriceTable, cal: &PeriodCalendar) -> ReturnTable {
    assert!(
        cal.last_return_day() < table.n_dates(),
        "calendar extends past the price table"
    );
    let n = table.n_assets();
    let mut values = Vec::with_capacity(cal.n_periods() * n);
    for p in cal.periods() {
        for i in 0..n {
            let base = table.price(p.start_day - 1, i);
            let last = table.price(p.end_day, i);
            values.push(last / base - 1.0);
        }
    }
    ReturnTable {
        values,
        n_assets: n,
    }
}

/// Day-over-day simple returns, row-major: (n_dates - 1) × assets.
/// Row `t` holds the return realized on date index `t + 1`.
#[derive(Debug, Clone)]
pub struct DailyReturnTable {
    values: Vec<f64>,
    n_assets: usize,
}

impl DailyReturnTable {
    /// Number of return days (one less than the table's date count).
    pub fn n_days(&self) -> usize {
        self.values.len() / self.n_assets
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    /// Return realized on `date_index` (must be >= 1).
    pub fn on_day(&self, date_index: usize, asset: usize) -> f64 {
        assert!(date_index >= 1, "date index 0 has no return");
        self.values[(date_index - 1) * self.n_assets + asset]
    }
}

pub fn daily_returns(table: &PriceTable) -> Result<DailyReturnTable> {
    if table.n_dates() < 2 {
        return Err(Error::InsufficientHistory {
            need: 2,
            have: table.n_dates(),
        });
    }
    let n = table.n_assets();
    let mut values = Vec::with_capacity((table.n_dates() - 1) * n);
    for day in 1..table.n_dates() {
        for i in 0..n {
            values.push(table.price(day, i) / table.price(day - 1, i) - 1.0);
        }
    }
    Ok(DailyReturnTable {
        values,
        n_assets: n,
    })
}

/// Ratio of the last known close to the close `horizon` days before it,
/// per asset, using only data strictly before `day_index`:
/// close(day_index - 1) / close(day_index - 1 - horizon).
pub fn trailing_ratio(table: &PriceTable, day_index: usize, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidConfig {
            reason: "trailing horizon must be at least 1 day".into(),
        });
    }
    if day_index > table.n_dates() {
        return Err(Error::BadRange {
            context: format!(
                "day index {day_index} past the table ({} dates)",
                table.n_dates()
            ),
        });
    }
    if day_index < horizon + 1 {
        return Err(Error::InsufficientHistory {
            need: horizon + 1,
            have: day_index,
        });
    }
    let last = day_index - 1;
    let base = last - horizon;
    Ok((0..table.n_assets())
        .map(|i| table.price(last, i) / table.price(base, i))
        .collect())
}
