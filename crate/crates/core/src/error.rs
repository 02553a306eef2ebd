//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by parsing, preprocessing, model evaluation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// CSV header or field layout does not match the documented schema.
    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    /// Timestamps are not non-decreasing.
    #[error("ordering error at line {line}: {msg}")]
    Ordering { line: usize, msg: String },

    /// Book invariant violated (ask <= bid) on an input line.
    #[error("crossed book at line {line}: bid {bid_px} >= ask {ask_px}")]
    CrossedBook { line: usize, bid_px: i64, ask_px: i64 },

    /// A side is missing where both quotes are required.
    #[error("incomplete book at line {line}: {msg}")]
    IncompleteBook { line: usize, msg: String },

    /// Argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// AES is undefined because no events were classified.
    #[error("AES undefined: no classified events")]
    UndefinedAes,

    /// Not enough distinct sizes to build the requested quantile grid.
    #[error("degenerate grid: {distinct} distinct edge values for {requested} buckets; try fewer buckets")]
    DegenerateGrid { distinct: usize, requested: usize },

    /// The birth-death chain has no invariant distribution.
    #[error("non-ergodic queue chain: {0}")]
    NonErgodic(String),

    /// An iterative numeric routine failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Event stream inconsistent with the model (e.g. a queue-consuming
    /// event observed while the queue is empty).
    #[error("data/model inconsistency: {0}")]
    Inconsistent(String),

    /// A simulator invariant was violated; indicates a bug, not bad input.
    #[error("internal inconsistency: {0}")]
    Internal(String),

    /// Invalid user-supplied input (paths, lengths, option combinations).
    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
