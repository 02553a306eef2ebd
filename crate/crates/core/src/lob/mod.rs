//! Level-I order-book ingestion and preprocessing.
//!
//! Input is a stream of book snapshots (one per order-flow event). From it
//! this module derives, in order:
//!
//! 1. the reference price path (midprice, or midprice +- half a tick when
//!    the spread is an even number of ticks),
//! 2. classified events: the 3-type scheme (limit / cancel / market at a
//!    fixed-price best queue) and the 8-type scheme (midprice moves plus
//!    the six non-moving best-level events),
//! 3. the average event size (AES) and queue sizes in AES units,
//! 4. segments of constant reference price used as independent
//!    realizations by the single-queue model,
//! 5. the per-side quantile grid mapping `(q_ask, q_bid)` to a finite
//!    state index for the two-sided model.

mod csv_io;
mod preprocess;

pub use csv_io::{parse_l1_csv, parse_l1_reader, write_l1_csv, CSV_HEADER};
pub use preprocess::{
    classify_events3, classify_events8, compute_aes, compute_reference_price, imbalance,
    mean_realization_length, quantile_grid, segment_by_pref, Classified3, Classified8,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Book side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

/// Side tag of a trade line; `None` marks a pure quote update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeSide {
    Bid,
    Ask,
    None,
}

/// One Level-I snapshot line. Prices are integer ticks, sizes are
/// contracts. A line either reports a trade (`trade_sz > 0`) or a quote
/// update, and always carries the post-event book state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    /// Seconds since session open, microsecond resolution.
    pub ts: f64,
    pub bid_px: i64,
    pub bid_sz: u64,
    pub ask_px: i64,
    pub ask_sz: u64,
    pub trade_sz: u64,
    pub trade_side: TradeSide,
}

/// Event types of the single-queue scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind3 {
    /// Limit order arrival (queue +size).
    Limit,
    /// Cancellation (queue -size, no trade).
    Cancel,
    /// Market order (queue -size via a trade).
    Market,
}

impl EventKind3 {
    /// Canonical model index: L=0, C=1, M=2.
    pub fn index(self) -> usize {
        match self {
            EventKind3::Limit => 0,
            EventKind3::Cancel => 1,
            EventKind3::Market => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(EventKind3::Limit),
            1 => Some(EventKind3::Cancel),
            2 => Some(EventKind3::Market),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EventKind3::Limit => "L",
            EventKind3::Cancel => "C",
            EventKind3::Market => "M",
        }
    }
}

/// Single-queue event: a size change at the tracked best-price level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event3 {
    pub ts: f64,
    pub kind: EventKind3,
    pub side: Side,
    /// Absolute size change in contracts.
    pub size: u64,
    /// Volume remaining at the tracked level, contracts.
    pub volume_after: u64,
}

/// Event types of the two-sided scheme: midprice moves plus the six
/// non-moving best-level events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind8 {
    PriceUp,
    PriceDown,
    LimitAsk,
    LimitBid,
    CancelAsk,
    CancelBid,
    MarketAsk,
    MarketBid,
}

impl EventKind8 {
    /// Canonical model index: P+=0, P-=1, La=2, Lb=3, Ca=4, Cb=5, Ma=6, Mb=7.
    pub fn index(self) -> usize {
        match self {
            EventKind8::PriceUp => 0,
            EventKind8::PriceDown => 1,
            EventKind8::LimitAsk => 2,
            EventKind8::LimitBid => 3,
            EventKind8::CancelAsk => 4,
            EventKind8::CancelBid => 5,
            EventKind8::MarketAsk => 6,
            EventKind8::MarketBid => 7,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        use EventKind8::*;
        [PriceUp, PriceDown, LimitAsk, LimitBid, CancelAsk, CancelBid, MarketAsk, MarketBid]
            .get(i)
            .copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            EventKind8::PriceUp => "P+",
            EventKind8::PriceDown => "P-",
            EventKind8::LimitAsk => "La",
            EventKind8::LimitBid => "Lb",
            EventKind8::CancelAsk => "Ca",
            EventKind8::CancelBid => "Cb",
            EventKind8::MarketAsk => "Ma",
            EventKind8::MarketBid => "Mb",
        }
    }
}

/// Two-sided event with the post-event best volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event8 {
    pub ts: f64,
    pub kind: EventKind8,
    /// Best ask volume after the event, contracts (always positive).
    pub ask_volume_after: u64,
    /// Best bid volume after the event, contracts (always positive).
    pub bid_volume_after: u64,
}

/// Piecewise-constant reference price path in half-tick units.
///
/// `half_ticks[i]` holds on `[times[i], times[i+1])`; the path is
/// right-continuous. Half-tick integers keep the odd/even spread
/// arithmetic exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefPath {
    pub times: Vec<f64>,
    pub half_ticks: Vec<i64>,
}

impl PrefPath {
    pub fn value_at(&self, t: f64) -> Option<i64> {
        if self.times.is_empty() || t < self.times[0] {
            return None;
        }
        let idx = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            n => n - 1,
        };
        Some(self.half_ticks[idx])
    }

    /// Reference price in ticks (may be half-integer).
    pub fn value_ticks_at(&self, t: f64) -> Option<f64> {
        self.value_at(t).map(|ht| ht as f64 / 2.0)
    }
}

/// Piecewise-constant, right-continuous queue path in AES units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuePath {
    pub side: Side,
    pub times: Vec<f64>,
    pub values: Vec<u32>,
}

impl QueuePath {
    pub fn value_at(&self, t: f64) -> Option<u32> {
        if self.times.is_empty() || t < self.times[0] {
            return None;
        }
        let idx = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            n => n - 1,
        };
        Some(self.values[idx])
    }
}

/// One event inside a constant-reference-price segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentEvent {
    pub ts: f64,
    pub kind: EventKind3,
    /// Size of the change, contracts.
    pub size: u64,
    /// Queue size right after the event, AES units.
    pub q_after: u32,
}

/// A maximal interval of constant reference price on one side, used as an
/// independent realization of the single-queue process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub side: Side,
    pub start: f64,
    pub end: f64,
    pub p_ref_half_ticks: i64,
    /// Queue size at `start`, AES units.
    pub q0: u32,
    pub events: Vec<SegmentEvent>,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Per-side queue-size quantile buckets mapping `(q_ask, q_bid)` to a
/// finite state index.
///
/// With `n` buckets per side there are `n - 1` interior edges per side and
/// the buckets are the intervals `]0, e1], ]e1, e2], ..., ]e(n-1), inf[`;
/// boundary values fall in the lower bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub n_buckets: usize,
    pub ask_edges: Vec<f64>,
    pub bid_edges: Vec<f64>,
}

impl StateGrid {
    pub fn new(n_buckets: usize, ask_edges: Vec<f64>, bid_edges: Vec<f64>) -> Result<Self> {
        if n_buckets < 1 || ask_edges.len() != n_buckets - 1 || bid_edges.len() != n_buckets - 1 {
            return Err(Error::Domain(format!(
                "grid with {n_buckets} buckets needs {} edges per side",
                n_buckets.max(1) - 1
            )));
        }
        for edges in [&ask_edges, &bid_edges] {
            for w in edges.windows(2) {
                if w[1] <= w[0] {
                    return Err(Error::DegenerateGrid {
                        distinct: edges.len(),
                        requested: n_buckets,
                    });
                }
            }
        }
        Ok(Self {
            n_buckets,
            ask_edges,
            bid_edges,
        })
    }

    fn bucket(edges: &[f64], v: f64) -> usize {
        // ]e(i-1), e(i)] intervals: boundary goes to the lower bucket.
        edges.partition_point(|&e| e < v)
    }

    /// Zero-based ask bucket of a positive queue size.
    pub fn ask_bucket(&self, v: f64) -> usize {
        Self::bucket(&self.ask_edges, v)
    }

    /// Zero-based bid bucket of a positive queue size.
    pub fn bid_bucket(&self, v: f64) -> usize {
        Self::bucket(&self.bid_edges, v)
    }

    /// Flattened state index `ask_bucket * n + bid_bucket`; state `(1,1)`
    /// of the model (both queues in their lowest bucket) is index 0.
    pub fn state_index(&self, ask_size: f64, bid_size: f64) -> usize {
        self.ask_bucket(ask_size) * self.n_buckets + self.bid_bucket(bid_size)
    }

    pub fn n_states(&self) -> usize {
        self.n_buckets * self.n_buckets
    }

    /// `(ask_bucket, bid_bucket)` of a flattened state index.
    pub fn unflatten(&self, state: usize) -> (usize, usize) {
        (state / self.n_buckets, state % self.n_buckets)
    }
}

/// Queue size in AES units: `ceil(volume / aes)`, zero iff the volume is
/// zero. A small relative guard keeps exact multiples of AES from being
/// pushed up a bucket by floating-point noise.
pub fn bucket_queue(volume: f64, aes: f64) -> Result<u32> {
    if !(aes > 0.0) {
        return Err(Error::Domain(format!("AES must be positive, got {aes}")));
    }
    if volume < 0.0 || !volume.is_finite() {
        return Err(Error::Domain(format!("volume must be non-negative, got {volume}")));
    }
    if volume == 0.0 {
        return Ok(0);
    }
    let r = volume / aes;
    let c = r.ceil();
    let q = if c - r > 1.0 - 1e-9 { c - 1.0 } else { c };
    Ok(q.max(1.0) as u32)
}
