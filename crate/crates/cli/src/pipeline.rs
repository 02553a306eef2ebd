//! Shared preprocessing glue: raw CSV to model-ready data structures.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qrh_core::lob::{
    bucket_queue, classify_events3, classify_events8, compute_aes, compute_reference_price,
    mean_realization_length, parse_l1_csv, quantile_grid, segment_by_pref, Classified3,
    Classified8, RawRecord, Segment, Side, StateGrid,
};
use qrh_core::qrh1::SegmentData;
use qrh_core::qrh2::Qrh2Data;

use crate::config::RunConfig;

/// Everything the commands derive from one input session.
pub struct Prepared {
    pub records: Vec<RawRecord>,
    pub aes: f64,
    pub bid: Classified3,
    pub ask: Classified3,
    pub segments: Vec<Segment>,
    pub tau_m: Option<f64>,
    pub cls8: Classified8,
}

/// Two-sided preparation: quantile grid, day stream and the post-move
/// redraw laws. Built on demand since the grid can be degenerate on
/// sessions that never move one side.
pub struct TwoSided {
    pub grid: StateGrid,
    pub day: Qrh2Data,
    /// `(q_ask, q_bid, probability)` in AES units.
    pub post_up: Vec<(u32, u32, f64)>,
    pub post_down: Vec<(u32, u32, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub n_records: usize,
    pub aes: f64,
    pub tau_m: Option<f64>,
    pub n_segments: usize,
    pub segment_events: usize,
    /// L/C/M counts over both sides.
    pub counts3: [usize; 3],
    /// Eight-type counts in canonical order.
    pub counts8: [usize; 8],
    pub skipped8: usize,
    pub mean_reversion_rate: Option<f64>,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let records = parse_l1_csv(&config.input_csv)
        .with_context(|| format!("parsing {}", config.input_csv.display()))?;
    if records.is_empty() {
        bail!("input file has no data rows");
    }
    let (_pref_path, pref) = compute_reference_price(&records)?;
    let bid = classify_events3(&records, &pref, Side::Bid)?;
    let ask = classify_events3(&records, &pref, Side::Ask)?;
    let aes = compute_aes(&records, &pref)?;

    let mut segments = segment_by_pref(&records, &pref, &bid, aes, config.min_events_per_segment)?;
    segments.extend(segment_by_pref(
        &records,
        &pref,
        &ask,
        aes,
        config.min_events_per_segment,
    )?);
    segments.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    let tau_m = mean_realization_length(&segments).ok();

    let cls8 = classify_events8(&records)?;

    Ok(Prepared {
        records,
        aes,
        bid,
        ask,
        segments,
        tau_m,
        cls8,
    })
}

pub fn prepare_two_sided(config: &RunConfig, prep: &Prepared) -> Result<TwoSided> {
    let aes = prep.aes;
    let cls8 = &prep.cls8;
    // Quantile grid over the AES-unit best-queue sizes observed at events.
    let ask_sizes: Vec<f64> = cls8
        .events
        .iter()
        .map(|e| bucket_queue(e.ask_volume_after as f64, aes).map(|q| q as f64))
        .collect::<qrh_core::Result<_>>()?;
    let bid_sizes: Vec<f64> = cls8
        .events
        .iter()
        .map(|e| bucket_queue(e.bid_volume_after as f64, aes).map(|q| q as f64))
        .collect::<qrh_core::Result<_>>()?;
    let grid = quantile_grid(&ask_sizes, &bid_sizes, config.n_buckets)?;

    let day = build_day_stream(&prep.records, cls8, aes, &grid)?;

    // Post-midprice-move redraw laws.
    let mut up: Vec<(u32, u32)> = Vec::new();
    let mut down: Vec<(u32, u32)> = Vec::new();
    for e in &cls8.events {
        let qa = bucket_queue(e.ask_volume_after as f64, aes)?;
        let qb = bucket_queue(e.bid_volume_after as f64, aes)?;
        match e.kind.index() {
            0 => up.push((qa, qb)),
            1 => down.push((qa, qb)),
            _ => {}
        }
    }
    Ok(TwoSided {
        grid,
        day,
        post_up: tally(&up),
        post_down: tally(&down),
    })
}

fn tally(samples: &[(u32, u32)]) -> Vec<(u32, u32, f64)> {
    let mut counts = std::collections::BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_insert(0usize) += 1;
    }
    let total = samples.len().max(1) as f64;
    counts
        .into_iter()
        .map(|((a, b), c)| (a, b, c as f64 / total))
        .collect()
}

fn build_day_stream(
    records: &[RawRecord],
    cls8: &Classified8,
    aes: f64,
    grid: &StateGrid,
) -> Result<Qrh2Data> {
    let t_start = records[0].ts;
    let t_end = records[records.len() - 1].ts;
    let state_of = |ask_vol: u64, bid_vol: u64| -> Result<usize> {
        let qa = bucket_queue(ask_vol as f64, aes)?;
        let qb = bucket_queue(bid_vol as f64, aes)?;
        Ok(grid.state_index(qa as f64, qb as f64))
    };
    let mut state_times = vec![t_start];
    let mut state_vals = vec![state_of(records[0].ask_sz, records[0].bid_sz)?];
    let mut times = Vec::with_capacity(cls8.events.len());
    let mut types = Vec::with_capacity(cls8.events.len());
    for e in &cls8.events {
        times.push(e.ts);
        types.push(e.kind.index());
        let s = state_of(e.ask_volume_after, e.bid_volume_after)?;
        if *state_vals.last().unwrap() != s {
            state_times.push(e.ts);
            state_vals.push(s);
        }
    }
    Ok(Qrh2Data {
        t_start,
        t_end,
        times,
        types,
        state_times,
        state_vals,
    })
}

impl Prepared {
    /// Segments in model coordinates, optionally restricted to one side.
    pub fn segment_data(&self, side: &str) -> Vec<SegmentData> {
        self.segments
            .iter()
            .filter(|s| match side {
                "bid" => s.side == Side::Bid,
                "ask" => s.side == Side::Ask,
                _ => true,
            })
            .map(SegmentData::from)
            .collect()
    }

    pub fn summary(&self) -> PreprocessSummary {
        let mut counts3 = [0usize; 3];
        for ev in self.bid.events.iter().chain(self.ask.events.iter()) {
            counts3[ev.kind.index()] += 1;
        }
        let mut counts8 = [0usize; 8];
        for ev in &self.cls8.events {
            counts8[ev.kind.index()] += 1;
        }
        let directions: Vec<i8> = self
            .cls8
            .events
            .iter()
            .filter_map(|e| match e.kind.index() {
                0 => Some(1),
                1 => Some(-1),
                _ => None,
            })
            .collect();
        PreprocessSummary {
            n_records: self.records.len(),
            aes: self.aes,
            tau_m: self.tau_m,
            n_segments: self.segments.len(),
            segment_events: self.segments.iter().map(|s| s.events.len()).sum(),
            counts3,
            counts8,
            skipped8: self.cls8.skipped,
            mean_reversion_rate: qrh_core::qrh2::mean_reversion_rate(&directions).ok(),
        }
    }
}
