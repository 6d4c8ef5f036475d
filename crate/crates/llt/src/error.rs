//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row failed to parse (non-numeric field, wrong column count, ...).
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// The input contained a header but no data rows.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Too many rows violated candle invariants (systemic corruption).
    #[error("{rejected} of {total} rows rejected ({percent:.2}%), above the 1% threshold")]
    TooManyRejected {
        rejected: usize,
        total: usize,
        percent: f64,
    },

    /// A requested window spans a gap or runs past the series.
    #[error("window incomplete: {0}")]
    WindowIncomplete(String),

    /// A mathematical precondition was violated (dimensions, finiteness, ranges).
    #[error("domain error: {0}")]
    Domain(String),

    /// Class balancing is impossible (one class empty).
    #[error("balance error: {0}")]
    Balance(String),

    /// Train/test split is impossible (too few instances).
    #[error("split error: {0}")]
    Split(String),

    /// A binary artifact had a bad magic number or inconsistent header.
    #[error("format error: {0}")]
    Format(String),

    /// Synthetic generation kept overflowing after damped retries.
    #[error("synthesis error: {0}")]
    Synth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
