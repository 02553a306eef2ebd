//! Reference price, event classification, AES, segmentation and the
//! quantile state grid.

use crate::error::{Error, Result};

use super::{
    bucket_queue, Event3, Event8, EventKind3, EventKind8, PrefPath, QueuePath, RawRecord, Segment,
    SegmentEvent, Side, StateGrid, TradeSide,
};

/// Reference price per record, in half-ticks, plus the compressed path.
///
/// The reference price equals the midprice when the spread is an odd
/// number of ticks. When it is even, it is the midprice shifted by half a
/// tick towards the previous reference price; the initial even-spread
/// case takes midprice minus half a tick so runs are reproducible.
pub fn compute_reference_price(records: &[RawRecord]) -> Result<(PrefPath, Vec<i64>)> {
    if records.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    let mut per_record = Vec::with_capacity(records.len());
    let mut prev: Option<i64> = None;
    for (i, r) in records.iter().enumerate() {
        if r.bid_sz == 0 || r.ask_sz == 0 {
            return Err(Error::IncompleteBook {
                line: i + 2,
                msg: "both sides must be quoted".into(),
            });
        }
        let mid_ht = r.bid_px + r.ask_px; // midprice in half-ticks
        let spread = r.ask_px - r.bid_px; // ticks
        let p = if spread.rem_euclid(2) == 1 {
            mid_ht
        } else {
            match prev {
                None => mid_ht - 1,
                Some(p0) => {
                    let lo = mid_ht - 1;
                    let hi = mid_ht + 1;
                    // Whichever is closer to the previous value; ties go down.
                    if (hi - p0).abs() < (lo - p0).abs() {
                        hi
                    } else {
                        lo
                    }
                }
            }
        };
        per_record.push(p);
        prev = Some(p);
    }
    let mut times = vec![records[0].ts];
    let mut values = vec![per_record[0]];
    for i in 1..records.len() {
        if per_record[i] != per_record[i - 1] {
            times.push(records[i].ts);
            values.push(per_record[i]);
        }
    }
    Ok((
        PrefPath {
            times,
            half_ticks: values,
        },
        per_record,
    ))
}

/// Classified single-queue events for one side, with the per-record
/// volume of the tracked level (contracts).
#[derive(Debug, Clone)]
pub struct Classified3 {
    pub side: Side,
    pub events: Vec<Event3>,
    /// Index of the record that produced each event.
    pub event_record: Vec<usize>,
    /// Volume at the tracked level after each record, contracts.
    pub level_volume: Vec<u64>,
}

impl Classified3 {
    /// Queue path in AES units, one breakpoint per volume change.
    pub fn queue_path(&self, records: &[RawRecord], aes: f64) -> Result<QueuePath> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in self.level_volume.iter().enumerate() {
            let q = bucket_queue(v as f64, aes)?;
            if values.last() != Some(&q) || values.is_empty() {
                times.push(records[i].ts);
                values.push(q);
            }
        }
        Ok(QueuePath {
            side: self.side,
            times,
            values,
        })
    }
}

/// Tracked level price in half-ticks: the first level below (bid) or
/// above (ask) the reference price.
fn level_half_ticks(pref_ht: i64, side: Side) -> i64 {
    match side {
        Side::Bid => pref_ht - 1,
        Side::Ask => pref_ht + 1,
    }
}

fn level_volume(r: &RawRecord, pref_ht: i64, side: Side) -> u64 {
    let (px, sz) = match side {
        Side::Bid => (r.bid_px, r.bid_sz),
        Side::Ask => (r.ask_px, r.ask_sz),
    };
    if 2 * px == level_half_ticks(pref_ht, side) {
        sz
    } else {
        0
    }
}

/// Classify one side's order flow into limit / cancel / market events at
/// the level adjacent to the reference price.
///
/// Trade lines on this side become market orders; volume increases at the
/// level become limit orders and decreases without a trade become
/// cancellations. Records that change the reference price relabel the
/// tracked level and emit no event; segmentation cuts there.
pub fn classify_events3(
    records: &[RawRecord],
    pref_per_record: &[i64],
    side: Side,
) -> Result<Classified3> {
    if records.len() != pref_per_record.len() {
        return Err(Error::Input("records and reference prices differ in length".into()));
    }
    if records.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    let mut events = Vec::new();
    let mut event_record = Vec::new();
    let mut level_vol = Vec::with_capacity(records.len());

    let mut v0 = level_volume(&records[0], pref_per_record[0], side);
    level_vol.push(v0);

    for i in 1..records.len() {
        let r = &records[i];
        let v1 = level_volume(r, pref_per_record[i], side);
        if pref_per_record[i] != pref_per_record[i - 1] {
            // Level relabeling: state jump, no event.
            level_vol.push(v1);
            v0 = v1;
            continue;
        }
        let is_own_trade = r.trade_sz > 0
            && matches!(
                (r.trade_side, side),
                (TradeSide::Bid, Side::Bid) | (TradeSide::Ask, Side::Ask)
            );
        if is_own_trade && v0 > 0 {
            events.push(Event3 {
                ts: r.ts,
                kind: EventKind3::Market,
                side,
                size: r.trade_sz,
                volume_after: v1,
            });
            event_record.push(i);
        } else if v1 > v0 {
            events.push(Event3 {
                ts: r.ts,
                kind: EventKind3::Limit,
                side,
                size: v1 - v0,
                volume_after: v1,
            });
            event_record.push(i);
        } else if v1 < v0 {
            events.push(Event3 {
                ts: r.ts,
                kind: EventKind3::Cancel,
                side,
                size: v0 - v1,
                volume_after: v1,
            });
            event_record.push(i);
        }
        level_vol.push(v1);
        v0 = v1;
    }
    Ok(Classified3 {
        side,
        events,
        event_record,
        level_volume: level_vol,
    })
}

/// Classified two-sided events with per-record best volumes.
#[derive(Debug, Clone)]
pub struct Classified8 {
    pub events: Vec<Event8>,
    pub event_record: Vec<usize>,
    /// Best ask volume after each record, contracts.
    pub ask_volume: Vec<u64>,
    /// Best bid volume after each record, contracts.
    pub bid_volume: Vec<u64>,
    /// Records that changed best prices without moving the midprice;
    /// these carry no classifiable event.
    pub skipped: usize,
}

/// Classify the full order flow into the eight-type scheme: midprice
/// moves (`P+`/`P-`) plus limit / cancel / market events at the best
/// levels that leave the midprice unchanged.
pub fn classify_events8(records: &[RawRecord]) -> Result<Classified8> {
    if records.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if r.bid_sz == 0 || r.ask_sz == 0 {
            return Err(Error::IncompleteBook {
                line: i + 2,
                msg: "both best levels must be non-empty".into(),
            });
        }
    }
    let mut events = Vec::new();
    let mut event_record = Vec::new();
    let mut ask_volume = Vec::with_capacity(records.len());
    let mut bid_volume = Vec::with_capacity(records.len());
    let mut skipped = 0usize;

    ask_volume.push(records[0].ask_sz);
    bid_volume.push(records[0].bid_sz);

    for i in 1..records.len() {
        let prev = &records[i - 1];
        let r = &records[i];
        let mid0 = prev.bid_px + prev.ask_px;
        let mid1 = r.bid_px + r.ask_px;
        let mut push = |kind: EventKind8| {
            events.push(Event8 {
                ts: r.ts,
                kind,
                ask_volume_after: r.ask_sz,
                bid_volume_after: r.bid_sz,
            });
            event_record.push(i);
        };
        if mid1 > mid0 {
            push(EventKind8::PriceUp);
        } else if mid1 < mid0 {
            push(EventKind8::PriceDown);
        } else if r.bid_px != prev.bid_px || r.ask_px != prev.ask_px {
            // Offsetting best-price moves with an unchanged midprice;
            // nothing in the eight-type scheme describes this record.
            skipped += 1;
        } else {
            if r.trade_sz > 0 {
                match r.trade_side {
                    TradeSide::Ask => push(EventKind8::MarketAsk),
                    TradeSide::Bid => push(EventKind8::MarketBid),
                    TradeSide::None => unreachable!("checked at parse time"),
                }
            }
            // Size changes on a non-traded side are limit/cancel events;
            // on the traded side the market order explains the change.
            if r.trade_side != TradeSide::Ask {
                if r.ask_sz > prev.ask_sz {
                    push(EventKind8::LimitAsk);
                } else if r.ask_sz < prev.ask_sz {
                    push(EventKind8::CancelAsk);
                }
            }
            if r.trade_side != TradeSide::Bid {
                if r.bid_sz > prev.bid_sz {
                    push(EventKind8::LimitBid);
                } else if r.bid_sz < prev.bid_sz {
                    push(EventKind8::CancelBid);
                }
            }
        }
        ask_volume.push(r.ask_sz);
        bid_volume.push(r.bid_sz);
    }
    Ok(Classified8 {
        events,
        event_record,
        ask_volume,
        bid_volume,
        skipped,
    })
}

/// Average event size: the arithmetic mean of absolute size changes over
/// all classified limit, cancel and market events on both sides.
pub fn compute_aes(records: &[RawRecord], pref_per_record: &[i64]) -> Result<f64> {
    let bid = classify_events3(records, pref_per_record, Side::Bid)?;
    let ask = classify_events3(records, pref_per_record, Side::Ask)?;
    let mut total = 0.0;
    let mut n = 0usize;
    for ev in bid.events.iter().chain(ask.events.iter()) {
        total += ev.size as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::UndefinedAes);
    }
    Ok(total / n as f64)
}

/// Cut one side's events into maximal constant-reference-price segments,
/// dropping segments with fewer than `min_events` events. Queue sizes are
/// expressed in AES units. The single-queue model's memory resets at each
/// segment start.
pub fn segment_by_pref(
    records: &[RawRecord],
    pref_per_record: &[i64],
    classified: &Classified3,
    aes: f64,
    min_events: usize,
) -> Result<Vec<Segment>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    if records.len() != pref_per_record.len() || records.len() != classified.level_volume.len() {
        return Err(Error::Input("inputs are not time-aligned".into()));
    }
    // Record indices opening each plateau.
    let mut bounds = vec![0usize];
    for i in 1..records.len() {
        if pref_per_record[i] != pref_per_record[i - 1] {
            bounds.push(i);
        }
    }
    bounds.push(records.len());

    let mut segments = Vec::new();
    let mut ev_cursor = 0usize;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let start = records[a].ts;
        let is_last = b == records.len();
        let end = if is_last {
            records[records.len() - 1].ts
        } else {
            records[b].ts
        };
        let q0 = bucket_queue(classified.level_volume[a] as f64, aes)?;

        let mut events = Vec::new();
        while ev_cursor < classified.events.len() && classified.event_record[ev_cursor] < b {
            let idx = classified.event_record[ev_cursor];
            let ev = &classified.events[ev_cursor];
            ev_cursor += 1;
            if idx < a {
                continue;
            }
            // Segment strictly before a reference-price change: events at
            // the change timestamp are dropped with the changing record.
            if !is_last && ev.ts >= end {
                continue;
            }
            events.push(SegmentEvent {
                ts: ev.ts,
                kind: ev.kind,
                size: ev.size,
                q_after: bucket_queue(ev.volume_after as f64, aes)?,
            });
        }
        if events.len() >= min_events {
            segments.push(Segment {
                side: classified.side,
                start,
                end,
                p_ref_half_ticks: pref_per_record[a],
                q0,
                events,
            });
        }
    }
    Ok(segments)
}

/// Average realization length seen from a uniformly drawn time point:
/// `E[s^2] / E[s]` over the segment lengths `s`.
pub fn mean_realization_length(segments: &[Segment]) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::Domain("no segments".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in segments {
        let d = s.duration();
        num += d * d;
        den += d;
    }
    if den == 0.0 {
        return Err(Error::Domain("segments have zero total length".into()));
    }
    Ok(num / den)
}

/// Queue imbalance `(q_b - q_a) / (q_b + q_a)` in [-1, 1].
pub fn imbalance(q_b: f64, q_a: f64) -> Result<f64> {
    if q_a < 0.0 || q_b < 0.0 {
        return Err(Error::Domain("queue sizes must be non-negative".into()));
    }
    let sum = q_a + q_b;
    if sum <= 0.0 {
        return Err(Error::Domain("imbalance undefined when both queues are empty".into()));
    }
    Ok((q_b - q_a) / sum)
}

/// Per-side empirical quantile grid with `n_buckets` buckets per side.
///
/// Edge `i` is the `ceil(i * N / n_buckets)`-th order statistic of the
/// observed sizes, so boundary values fall in the lower bucket.
pub fn quantile_grid(
    ask_sizes: &[f64],
    bid_sizes: &[f64],
    n_buckets: usize,
) -> Result<StateGrid> {
    if n_buckets == 0 {
        return Err(Error::Domain("need at least one bucket".into()));
    }
    let edges_for = |sizes: &[f64]| -> Result<Vec<f64>> {
        if sizes.is_empty() {
            return Err(Error::Domain("no sizes to build quantile grid from".into()));
        }
        let mut sorted: Vec<f64> = sizes.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let mut edges = Vec::with_capacity(n_buckets - 1);
        for i in 1..n_buckets {
            let rank = (i * n).div_ceil(n_buckets);
            edges.push(sorted[rank - 1]);
        }
        Ok(edges)
    };
    let ask_edges = edges_for(ask_sizes)?;
    let bid_edges = edges_for(bid_sizes)?;
    for edges in [&ask_edges, &bid_edges] {
        let mut distinct = 1;
        for w in edges.windows(2) {
            if w[1] > w[0] {
                distinct += 1;
            }
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateGrid {
                distinct,
                requested: n_buckets,
            });
        }
    }
    StateGrid::new(n_buckets, ask_edges, bid_edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(ts: f64, bid_px: i64, bid_sz: u64, ask_px: i64, ask_sz: u64) -> RawRecord {
        RawRecord {
            ts,
            bid_px,
            bid_sz,
            ask_px,
            ask_sz,
            trade_sz: 0,
            trade_side: TradeSide::None,
        }
    }

    fn trade(
        ts: f64,
        bid_px: i64,
        bid_sz: u64,
        ask_px: i64,
        ask_sz: u64,
        sz: u64,
        side: TradeSide,
    ) -> RawRecord {
        RawRecord {
            ts,
            bid_px,
            bid_sz,
            ask_px,
            ask_sz,
            trade_sz: sz,
            trade_side: side,
        }
    }

    #[test]
    fn reference_price_odd_spread_is_mid() {
        // bid 100, ask 101: spread 1 tick -> p_ref = 100.5 = 201 half-ticks
        let recs = vec![quote(0.0, 100, 5, 101, 5)];
        let (_, per) = compute_reference_price(&recs).unwrap();
        assert_eq!(per[0], 201);
    }

    #[test]
    fn reference_price_even_spread_prefers_previous() {
        // spread 1 -> p_ref 100.5; then ask moves to 102 (spread 2, mid 101):
        // candidates 100.5 / 101.5, keep 100.5.
        let recs = vec![quote(0.0, 100, 5, 101, 5), quote(1.0, 100, 5, 102, 5)];
        let (_, per) = compute_reference_price(&recs).unwrap();
        assert_eq!(per[1], 201);
        // Initial even spread resolves to mid - half tick.
        let recs = vec![quote(0.0, 100, 5, 102, 5)];
        let (_, per) = compute_reference_price(&recs).unwrap();
        assert_eq!(per[0], 201);
    }

    #[test]
    fn reference_price_constant_book_constant_path() {
        let recs: Vec<RawRecord> = (0..10).map(|i| quote(i as f64, 100, 5, 101, 7)).collect();
        let (path, _) = compute_reference_price(&recs).unwrap();
        assert_eq!(path.half_ticks, vec![201]);
    }

    #[test]
    fn reference_price_requires_both_sides() {
        let recs = vec![quote(0.0, 100, 0, 101, 5)];
        assert!(matches!(
            compute_reference_price(&recs),
            Err(Error::IncompleteBook { .. })
        ));
    }

    #[test]
    fn classify_limit_and_market() {
        let recs = vec![
            quote(0.0, 100, 10, 101, 5),
            quote(1.0, 100, 13, 101, 5),                       // bid L +3
            trade(2.0, 100, 13, 101, 3, 2, TradeSide::Ask),    // ask M 2
            quote(3.0, 100, 9, 101, 3),                        // bid C 4
        ];
        let (_, pref) = compute_reference_price(&recs).unwrap();
        let bid = classify_events3(&recs, &pref, Side::Bid).unwrap();
        let ask = classify_events3(&recs, &pref, Side::Ask).unwrap();
        assert_eq!(bid.events.len(), 2);
        assert_eq!(bid.events[0].kind, EventKind3::Limit);
        assert_eq!(bid.events[0].size, 3);
        assert_eq!(bid.events[1].kind, EventKind3::Cancel);
        assert_eq!(bid.events[1].size, 4);
        assert_eq!(ask.events.len(), 1);
        assert_eq!(ask.events[0].kind, EventKind3::Market);
        assert_eq!(ask.events[0].volume_after, 3);
    }

    #[test]
    fn classify_tracks_empty_level_and_refill() {
        // Bid level at 100 (p_ref 100.5): full cancel reveals 99, then a
        // limit order refills 100. Queue goes 5 -> 0 -> 4.
        let recs = vec![
            quote(0.0, 100, 5, 101, 6),
            quote(1.0, 99, 8, 101, 6), // C 5 at the tracked level (p_ref stays)
            quote(2.0, 100, 4, 101, 6), // L 4 back at the level
        ];
        let (_, pref) = compute_reference_price(&recs).unwrap();
        assert_eq!(pref, vec![201, 201, 201]); // closer rule keeps 100.5
        let bid = classify_events3(&recs, &pref, Side::Bid).unwrap();
        assert_eq!(bid.level_volume, vec![5, 0, 4]);
        assert_eq!(bid.events.len(), 2);
        assert_eq!(bid.events[0].kind, EventKind3::Cancel);
        assert_eq!(bid.events[0].size, 5);
        assert_eq!(bid.events[1].kind, EventKind3::Limit);
        assert_eq!(bid.events[1].size, 4);
    }

    #[test]
    fn classify8_price_moves() {
        let recs = vec![
            quote(0.0, 100, 5, 101, 5),
            quote(1.0, 100, 5, 102, 4),  // ask off -> mid up? 201 -> 202: P+
            trade(2.0, 100, 5, 102, 2, 2, TradeSide::Ask), // Ma
            quote(3.0, 100, 8, 102, 2),  // Lb
            quote(4.0, 100, 8, 101, 3),  // new ask inside spread: mid down: P-
        ];
        let cls = classify_events8(&recs).unwrap();
        let kinds: Vec<EventKind8> = cls.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind8::PriceUp,
                EventKind8::MarketAsk,
                EventKind8::LimitBid,
                EventKind8::PriceDown
            ]
        );
        assert_eq!(cls.skipped, 0);
    }

    #[test]
    fn aes_is_mean_event_size() {
        // Sizes 2, 4, 6 -> AES 4.
        let recs = vec![
            quote(0.0, 100, 10, 101, 5),
            quote(1.0, 100, 12, 101, 5), // L 2 bid
            quote(2.0, 100, 8, 101, 5),  // C 4 bid
            quote(3.0, 100, 8, 101, 11), // L 6 ask
        ];
        let (_, pref) = compute_reference_price(&recs).unwrap();
        assert!((compute_aes(&recs, &pref).unwrap() - 4.0).abs() < 1e-12);

        // Single event of size 7 -> 7.
        let recs = vec![quote(0.0, 100, 10, 101, 5), quote(1.0, 100, 17, 101, 5)];
        let (_, pref) = compute_reference_price(&recs).unwrap();
        assert!((compute_aes(&recs, &pref).unwrap() - 7.0).abs() < 1e-12);

        // No events -> undefined.
        let recs = vec![quote(0.0, 100, 10, 101, 5)];
        let (_, pref) = compute_reference_price(&recs).unwrap();
        assert!(matches!(compute_aes(&recs, &pref), Err(Error::UndefinedAes)));
    }

    #[test]
    fn segmentation_thresholds() {
        // One plateau with 25 events -> one segment.
        let mut recs = vec![quote(0.0, 100, 10, 101, 5)];
        let mut sz = 10u64;
        for i in 0..25 {
            sz += 1;
            recs.push(quote(0.1 * (i + 1) as f64, 100, sz, 101, 5));
        }
        let (_, pref) = compute_reference_price(&recs).unwrap();
        let cls = classify_events3(&recs, &pref, Side::Bid).unwrap();
        let segs = segment_by_pref(&recs, &pref, &cls, 1.0, 20).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].events.len(), 25);
        assert_eq!(segs[0].q0, 10);

        // A p_ref change splitting 30 events 19 + 11 -> nothing kept.
        let mut recs = vec![quote(0.0, 100, 10, 101, 5)];
        let mut sz = 10u64;
        for i in 0..19 {
            sz += 1;
            recs.push(quote(0.1 * (i + 1) as f64, 100, sz, 101, 5));
        }
        recs.push(quote(10.0, 101, 3, 102, 5)); // p_ref moves
        for i in 0..11 {
            sz = 3 + i + 1;
            recs.push(quote(10.0 + 0.1 * (i + 1) as f64, 101, sz, 102, 5));
        }
        let (_, pref) = compute_reference_price(&recs).unwrap();
        let cls = classify_events3(&recs, &pref, Side::Bid).unwrap();
        let segs = segment_by_pref(&recs, &pref, &cls, 1.0, 20).unwrap();
        assert!(segs.is_empty());
    }

    #[test]
    fn tau_m_examples() {
        let seg = |start: f64, end: f64| Segment {
            side: Side::Bid,
            start,
            end,
            p_ref_half_ticks: 201,
            q0: 0,
            events: vec![],
        };
        assert!((mean_realization_length(&[seg(0.0, 7.0)]).unwrap() - 7.0).abs() < 1e-12);
        let tm = mean_realization_length(&[seg(0.0, 1.0), seg(1.0, 4.0)]).unwrap();
        assert!((tm - 2.5).abs() < 1e-12);
    }

    #[test]
    fn imbalance_symmetry() {
        assert_eq!(imbalance(3.0, 3.0).unwrap(), 0.0);
        assert!((imbalance(3.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((imbalance(1.0, 3.0).unwrap() + 0.5).abs() < 1e-15);
        for (a, b) in [(2.0, 5.0), (1.0, 9.0), (4.0, 4.0)] {
            let x = imbalance(a, b).unwrap();
            let y = imbalance(b, a).unwrap();
            assert!((x + y).abs() < 1e-15);
        }
        assert!(imbalance(0.0, 0.0).is_err());
    }

    #[test]
    fn quantile_grid_uniform_sizes() {
        let sizes: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        let g = quantile_grid(&sizes, &sizes, 5).unwrap();
        assert_eq!(g.ask_edges, vec![20.0, 40.0, 60.0, 80.0]);
        // Every positive size maps to exactly one bucket.
        for v in 1..=200 {
            assert!(g.ask_bucket(v as f64) < 5);
        }
    }

    #[test]
    fn quantile_grid_degenerate() {
        let sizes = vec![1.0; 50];
        match quantile_grid(&sizes, &sizes, 5) {
            Err(Error::DegenerateGrid { requested, .. }) => assert_eq!(requested, 5),
            other => panic!("expected degenerate grid, got {other:?}"),
        }
    }
}
