//! Candle CSV ingestion and continuity auditing.
//!
//! Input files follow the exchange-export layout: an optional banner line
//! (attribution URL), then a header row, then one row per minute bar.
//! Column names are matched case-insensitively with aliases, extra columns
//! are ignored, and rows may arrive in any order. The parser emits a
//! strictly ascending, de-duplicated series of six-feature observations.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Bar interval this pipeline operates on.
pub const INTERVAL_S: i64 = 60;

/// Number of initial features per bar.
pub const FEATURE_COUNT: usize = 6;

/// Fixed column order of the six initial features.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "open",
    "high",
    "low",
    "close",
    "base_volume",
    "quote_volume",
];

/// Fraction of invariant-violating rows tolerated before a hard failure.
const REJECT_THRESHOLD: f64 = 0.01;

/// One 1-minute OHLCV bar with base and quote volumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candle {
    /// Unix seconds.
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    /// Traded amount in the base asset.
    pub base_volume: f64,
    /// Traded amount in the quote asset (the stablecoin side).
    pub quote_volume: f64,
}

impl Candle {
    /// Check the OHLC ordering and finiteness/positivity invariants.
    pub fn is_valid(&self) -> bool {
        let prices = [self.open, self.high, self.low, self.close];
        prices.iter().all(|p| p.is_finite() && *p > 0.0)
            && self.base_volume.is_finite()
            && self.base_volume >= 0.0
            && self.quote_volume.is_finite()
            && self.quote_volume >= 0.0
            && self.low <= self.open.min(self.close)
            && self.high >= self.open.max(self.close)
    }

    /// The six features in the fixed column order.
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.open,
            self.high,
            self.low,
            self.close,
            self.base_volume,
            self.quote_volume,
        ]
    }
}

/// Ascending, gap-possible series of candles for one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleSeries {
    pub symbol: String,
    pub interval_s: i64,
    pub candles: Vec<Candle>,
}

impl CandleSeries {
    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    /// Index of the candle at `ts`, if present.
    pub fn index_of(&self, ts: i64) -> Option<usize> {
        self.candles.binary_search_by_key(&ts, |c| c.timestamp).ok()
    }
}

/// Row rejection statistics from one parse.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseStats {
    /// Data rows seen (valid + rejected).
    pub total_rows: usize,
    /// Rows dropped for violating candle invariants.
    pub rejected_rows: usize,
}

/// One maximal run of missing bars.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    /// Timestamp of the first missing bar.
    pub start_ts: i64,
    /// Timestamp of the last missing bar.
    pub end_ts: i64,
    pub missing_count: usize,
}

/// Continuity audit of a series against its 60-second grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub gaps: Vec<Gap>,
    pub total_missing: usize,
    /// present / (present + missing); 1.0 for empty series.
    pub coverage_fraction: f64,
}

/// Parse an exchange-export CSV into an ascending candle series.
///
/// Duplicate timestamps keep the first occurrence in file order.
/// Millisecond timestamps (>= 10^12) are converted to seconds. Rows that
/// violate candle invariants are dropped and counted; more than 1% of
/// them is a hard error. Unparseable numeric fields fail immediately
/// with the offending line number.
pub fn parse_candle_csv<R: Read>(reader: R, symbol: &str) -> Result<(CandleSeries, ParseStats)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut records = csv_reader.records();
    let first = match records.next() {
        Some(rec) => rec.map_err(csv_to_parse_error)?,
        None => return Err(Error::EmptyInput("no rows in candle CSV".into())),
    };

    let columns = match ColumnMap::from_header(&first) {
        Some(map) => map,
        None => {
            // first line was a banner; the header must follow
            let second = match records.next() {
                Some(rec) => rec.map_err(csv_to_parse_error)?,
                None => return Err(Error::EmptyInput("banner line but no header row".into())),
            };
            ColumnMap::from_header(&second).ok_or_else(|| Error::Parse {
                line: second.position().map_or(2, |p| p.line()),
                message: "no recognizable header row (need unix/time, open, high, low, close, two volumes)"
                    .into(),
            })?
        }
    };

    let mut by_ts: BTreeMap<i64, Candle> = BTreeMap::new();
    let mut stats = ParseStats::default();
    for rec in records {
        let rec = rec.map_err(csv_to_parse_error)?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        stats.total_rows += 1;
        let line = rec.position().map_or(0, |p| p.line());
        let candle = columns.parse_row(&rec, line)?;
        if !candle.is_valid() {
            stats.rejected_rows += 1;
            continue;
        }
        by_ts.entry(candle.timestamp).or_insert(candle);
    }

    if stats.total_rows == 0 {
        return Err(Error::EmptyInput("header present but no data rows".into()));
    }
    let percent = stats.rejected_rows as f64 / stats.total_rows as f64;
    if percent > REJECT_THRESHOLD {
        return Err(Error::TooManyRejected {
            rejected: stats.rejected_rows,
            total: stats.total_rows,
            percent: percent * 100.0,
        });
    }

    Ok((
        CandleSeries {
            symbol: symbol.to_string(),
            interval_s: INTERVAL_S,
            candles: by_ts.into_values().collect(),
        },
        stats,
    ))
}

/// Write a series in the canonical header layout parsed by
/// [`parse_candle_csv`]. Floats use the shortest round-trip form, so
/// parse(serialize(s)) == s.
pub fn write_candle_csv(series: &CandleSeries) -> String {
    let mut out = String::from("unix,open,high,low,close,volume,quote_volume\n");
    for c in &series.candles {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.timestamp, c.open, c.high, c.low, c.close, c.base_volume, c.quote_volume
        ));
    }
    out
}

/// Report every maximal run of missing 60-second bars.
pub fn audit_continuity(series: &CandleSeries) -> GapReport {
    let mut gaps = Vec::new();
    let mut total_missing = 0usize;
    for pair in series.candles.windows(2) {
        let (a, b) = (pair[0].timestamp, pair[1].timestamp);
        let missing = ((b - a) / INTERVAL_S - 1).max(0) as usize;
        if missing > 0 {
            gaps.push(Gap {
                start_ts: a + INTERVAL_S,
                end_ts: a + INTERVAL_S * missing as i64,
                missing_count: missing,
            });
            total_missing += missing;
        }
    }
    let present = series.len();
    let coverage_fraction = if present == 0 {
        1.0
    } else {
        present as f64 / (present + total_missing) as f64
    };
    GapReport {
        gaps,
        total_missing,
        coverage_fraction,
    }
}

/// Extract `count` consecutive bars starting at `start_ts` as a
/// `count x 6` matrix in the fixed feature order.
pub fn feature_matrix(series: &CandleSeries, start_ts: i64, count: usize) -> Result<Matrix> {
    let start = series.index_of(start_ts).ok_or_else(|| {
        Error::WindowIncomplete(format!("no candle at start timestamp {start_ts}"))
    })?;
    if start + count > series.len() {
        return Err(Error::WindowIncomplete(format!(
            "window of {count} bars at {start_ts} runs past the series"
        )));
    }
    let mut m = Matrix::zeros(count, FEATURE_COUNT);
    for i in 0..count {
        let candle = &series.candles[start + i];
        let expected_ts = start_ts + (i as i64) * INTERVAL_S;
        if candle.timestamp != expected_ts {
            return Err(Error::WindowIncomplete(format!(
                "missing bar at {expected_ts} inside window starting {start_ts}"
            )));
        }
        for (j, x) in candle.features().iter().enumerate() {
            m.set(i, j, *x);
        }
    }
    Ok(m)
}

fn csv_to_parse_error(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Resolved indices of the required columns in a header row.
struct ColumnMap {
    ts: usize,
    open: usize,
    high: usize,
    low: usize,
    close: usize,
    base_volume: usize,
    quote_volume: usize,
}

impl ColumnMap {
    /// Try to interpret a record as the header row.
    fn from_header(rec: &csv::StringRecord) -> Option<ColumnMap> {
        let names: Vec<String> = rec
            .iter()
            .map(|f| f.trim().trim_start_matches('\u{feff}').to_lowercase())
            .collect();
        let find = |cands: &[&str]| names.iter().position(|n| cands.contains(&n.as_str()));

        let ts = find(&["unix", "time"])?;
        let open = find(&["open"])?;
        let high = find(&["high"])?;
        let low = find(&["low"])?;
        let close = find(&["close"])?;

        // quote volume first: an exact alias or the stablecoin column
        let quote_volume = names.iter().position(|n| {
            n == "quote_volume" || n == "volume_quote" || n == "volume usdt" || n == "volume usd"
        })?;
        // base volume: plain "volume" or the remaining "volume <asset>"
        let base_volume = names.iter().position(|n| {
            n != names[quote_volume].as_str() && (n == "volume" || n.starts_with("volume "))
        })?;
        Some(ColumnMap {
            ts,
            open,
            high,
            low,
            close,
            base_volume,
            quote_volume,
        })
    }

    fn parse_row(&self, rec: &csv::StringRecord, line: u64) -> Result<Candle> {
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = rec.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {name} column"),
            })?;
            raw.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric {name}: {raw:?}"),
            })
        };
        let ts_raw = field(self.ts, "timestamp")?;
        if !ts_raw.is_finite() {
            return Err(Error::Parse {
                line,
                message: "non-finite timestamp".into(),
            });
        }
        // millisecond exports are >= 10^12
        let ts_secs = if ts_raw.abs() >= 1e12 {
            ts_raw / 1000.0
        } else {
            ts_raw
        };
        Ok(Candle {
            timestamp: ts_secs.round() as i64,
            open: field(self.open, "open")?,
            high: field(self.high, "high")?,
            low: field(self.low, "low")?,
            close: field(self.close, "close")?,
            base_volume: field(self.base_volume, "base volume")?,
            quote_volume: field(self.quote_volume, "quote volume")?,
        })
    }
}
