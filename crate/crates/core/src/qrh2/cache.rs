//! Parameter-independent precomputations for the two-sided model.
//!
//! Everything the likelihood and the least-squares contrast need is
//! collected in one sweep over the merged timeline of events and state
//! changes:
//!
//! ```text
//! Dur(s)            = int 1{state = s} dt
//! C[m](s)           = #{type-m events arriving in state s}
//! G[m][u](s)        = int 1{state = s} g[m][u](t) dt
//! H[mu][m'u'](s)    = int 1{state = s} g[m][u](t) g[m'][u'](t) dt
//! E[l][mu](s)       = sum over type-l events in state s of g[m][u](t_k)
//! ```
//!
//! plus the strictly-prior `g` values at every event. On an interval of
//! length `dt` starting with right-limits `h`, the exact pieces are
//! `h (1 - exp(-b dt)) / b` for `G` and
//! `h h' (1 - exp(-(b + b') dt)) / (b + b')` for `H`.

use crate::error::{Error, Result};
use crate::kernels::DecaySet;

/// One trading day of events with the exogenous state path.
///
/// The state path is piecewise constant and right-continuous:
/// `state_vals[i]` holds on `[state_times[i], state_times[i+1])`, and it
/// must cover `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qrh2Data {
    pub t_start: f64,
    pub t_end: f64,
    pub times: Vec<f64>,
    pub types: Vec<usize>,
    pub state_times: Vec<f64>,
    pub state_vals: Vec<usize>,
}

impl Qrh2Data {
    pub fn validate(&self, dim: usize, n_states: usize) -> Result<()> {
        if self.times.len() != self.types.len() {
            return Err(Error::Input("times and types differ in length".into()));
        }
        if self.t_end < self.t_start {
            return Err(Error::Input("stream ends before it starts".into()));
        }
        let mut prev = self.t_start;
        for (k, &t) in self.times.iter().enumerate() {
            if t < prev {
                return Err(Error::Ordering {
                    line: k,
                    msg: format!("event time {t} before {prev}"),
                });
            }
            if t > self.t_end {
                return Err(Error::Input(format!("event at {t} beyond horizon {}", self.t_end)));
            }
            prev = t;
        }
        if self.types.iter().any(|&m| m >= dim) {
            return Err(Error::Input("event type out of range".into()));
        }
        if self.state_times.is_empty()
            || self.state_times[0] > self.t_start
            || self.state_times.len() != self.state_vals.len()
        {
            return Err(Error::Input("state path must cover the stream from its start".into()));
        }
        if self.state_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("state path times must be non-decreasing".into()));
        }
        if self.state_vals.iter().any(|&s| s >= n_states) {
            return Err(Error::Input("state index out of range".into()));
        }
        Ok(())
    }
}

/// Sweep products; see the module docs for the definitions.
#[derive(Debug, Clone)]
pub struct LsCache {
    pub dim: usize,
    pub n_decays: usize,
    pub n_states: usize,
    pub n_events: usize,
    pub t_total: f64,
    /// Decay grid the cache was built with.
    pub decays: Option<DecaySet>,
    /// Strictly-prior `g[m][u]` at each event, `[k][m*u]` blocks.
    g_events: Vec<f64>,
    /// State just before each event.
    pub event_state: Vec<usize>,
    pub event_type: Vec<usize>,
    /// Occupation time per state.
    pub dur: Vec<f64>,
    /// Event counts `[m][s]`.
    pub counts: Vec<f64>,
    /// `G` integrals `[m*u][s]`.
    g_int: Vec<f64>,
    /// `H` integrals `[s][m*u][m'*u']`, symmetric in the two kernel axes.
    h_int: Vec<f64>,
    /// Event-side sums `E[l][m*u][s]`.
    e_sum: Vec<f64>,
}

impl LsCache {
    #[inline]
    pub fn width(&self) -> usize {
        self.dim * self.n_decays
    }

    #[inline]
    pub fn g_event(&self, k: usize) -> &[f64] {
        let w = self.width();
        &self.g_events[k * w..(k + 1) * w]
    }

    #[inline]
    pub fn g_int(&self, i: usize, s: usize) -> f64 {
        self.g_int[i * self.n_states + s]
    }

    #[inline]
    pub fn h_int(&self, s: usize) -> &[f64] {
        let w = self.width();
        &self.h_int[s * w * w..(s + 1) * w * w]
    }

    pub fn has_h(&self) -> bool {
        !self.h_int.is_empty()
    }

    #[inline]
    pub fn e_sum(&self, l: usize, i: usize, s: usize) -> f64 {
        self.e_sum[(l * self.width() + i) * self.n_states + s]
    }

    #[inline]
    pub fn count(&self, m: usize, s: usize) -> f64 {
        self.counts[m * self.n_states + s]
    }
}

/// Build the cache in one pass; `with_h` controls whether the quadratic
/// `H` table (needed by the least-squares contrast only) is accumulated.
pub fn precompute_ls(
    data: &Qrh2Data,
    decays: &DecaySet,
    dim: usize,
    n_states: usize,
    with_h: bool,
) -> Result<LsCache> {
    data.validate(dim, n_states)?;
    let u = decays.len();
    let w = dim * u;
    let n = data.times.len();
    let betas = decays.betas();

    let mut cache = LsCache {
        dim,
        n_decays: u,
        n_states,
        n_events: n,
        t_total: data.t_end - data.t_start,
        decays: Some(decays.clone()),
        g_events: vec![0.0; n * w],
        event_state: vec![0; n],
        event_type: data.types.clone(),
        dur: vec![0.0; n_states],
        counts: vec![0.0; dim * n_states],
        g_int: vec![0.0; w * n_states],
        h_int: if with_h {
            vec![0.0; n_states * w * w]
        } else {
            Vec::new()
        },
        e_sum: vec![0.0; dim * w * n_states],
    };

    // Right-limit kernel sums at the sweep cursor.
    let mut g_cur = vec![0.0; w];
    let mut t_cur = data.t_start;

    // State cursor: index of the piece containing t_cur.
    let mut sp = data.state_times.partition_point(|&t| t <= data.t_start) - 1;
    let mut state = data.state_vals[sp];

    let mut ev = 0usize;
    loop {
        // Next knot: event, state change, or the horizon.
        let next_event = data.times.get(ev).copied();
        let next_state = data
            .state_times
            .get(sp + 1)
            .copied()
            .filter(|&t| t <= data.t_end);
        let (t_next, is_event) = match (next_event, next_state) {
            (Some(te), Some(ts)) if ts < te => (ts, false),
            (Some(te), _) => (te, true),
            (None, Some(ts)) => (ts, false),
            (None, None) => (data.t_end, false),
        };
        let dt = t_next - t_cur;

        // Accumulate the interval [t_cur, t_next) in the current state.
        if dt > 0.0 {
            cache.dur[state] += dt;
            for m in 0..dim {
                for ui in 0..u {
                    let i = m * u + ui;
                    let b = betas[ui];
                    let decay = (-b * dt).exp();
                    cache.g_int[i * n_states + state] += g_cur[i] * (1.0 - decay) / b;
                }
            }
            if with_h {
                let hs = &mut cache.h_int[state * w * w..(state + 1) * w * w];
                for i in 0..w {
                    let gi = g_cur[i];
                    if gi == 0.0 {
                        continue;
                    }
                    let bi = betas[i % u];
                    for j in i..w {
                        let gj = g_cur[j];
                        if gj == 0.0 {
                            continue;
                        }
                        let bj = betas[j % u];
                        let bsum = bi + bj;
                        let piece = gi * gj * (1.0 - (-bsum * dt).exp()) / bsum;
                        hs[i * w + j] += piece;
                        if i != j {
                            hs[j * w + i] += piece;
                        }
                    }
                }
            }
            // Decay the right-limits to t_next.
            for i in 0..w {
                g_cur[i] *= (-betas[i % u] * dt).exp();
            }
        }
        t_cur = t_next;

        if is_event {
            let m = data.types[ev];
            cache.g_events[ev * w..(ev + 1) * w].copy_from_slice(&g_cur);
            cache.event_state[ev] = state;
            cache.counts[m * n_states + state] += 1.0;
            for i in 0..w {
                let gi = g_cur[i];
                if gi != 0.0 {
                    cache.e_sum[(m * w + i) * n_states + state] += gi;
                }
            }
            // The event now enters the history.
            for ui in 0..u {
                g_cur[m * u + ui] += betas[ui];
            }
            ev += 1;
        } else if next_state.is_some() && t_cur >= data.state_times[sp + 1] {
            sp += 1;
            state = data.state_vals[sp];
        } else {
            break; // reached the horizon
        }
    }

    Ok(cache)
}
