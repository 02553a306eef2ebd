//! Exact log-likelihood and gradients of the single-queue model.
//!
//! The convolution states are carried through the pooled event sequence
//! of a segment by
//!
//! ```text
//! g[m][u](t_k)         = exp(-b dt) * (g[m][u](t_{k-1}) + b * [type_{k-1} = m])
//! int_{t_{k-1}}^{t_k} g = (1 - exp(-b dt)) / b * (g[m][u](t_{k-1}) + b * [type_{k-1} = m])
//! ```
//!
//! with `dt = t_k - t_{k-1}` and `g = 0` at the segment start (the Hawkes
//! memory resets whenever the reference price moves). The compensator of
//! a queue-consuming type collects no mass on empty-queue intervals.

use crate::error::{Error, Result};
use crate::kernels::{DecaySet, KernelCoeffs};

use super::{Qrh1Params, SegmentData};

/// Per-segment convolution cache.
///
/// `g` holds the strictly-prior kernel sums at each event time; `dg[k]`
/// holds the integrals of `g` over the inter-event interval ending at
/// event `k`, with one extra block for the tail up to the segment end.
/// Neither depends on the fitted parameters.
#[derive(Debug, Clone)]
pub struct GGCache {
    pub dim: usize,
    pub n_decays: usize,
    pub n_events: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl GGCache {
    #[inline]
    pub fn g_at(&self, k: usize, m: usize, u: usize) -> f64 {
        self.g[(k * self.dim + m) * self.n_decays + u]
    }

    /// Integral of `g[m][u]` over interval `k` (ending at event `k`, or
    /// at the segment end for `k = n_events`).
    #[inline]
    pub fn dg_at(&self, k: usize, m: usize, u: usize) -> f64 {
        self.dg[(k * self.dim + m) * self.n_decays + u]
    }

    fn g_block(&self, k: usize) -> &[f64] {
        let w = self.dim * self.n_decays;
        &self.g[k * w..(k + 1) * w]
    }

    fn dg_block(&self, k: usize) -> &[f64] {
        let w = self.dim * self.n_decays;
        &self.dg[k * w..(k + 1) * w]
    }
}

/// One pass over a segment's pooled events producing the `g`/`G` cache in
/// `O(n * dim * n_decays)`.
pub fn precompute_gg(seg: &SegmentData, decays: &DecaySet, dim: usize) -> Result<GGCache> {
    seg.validate(dim)?;
    let u = decays.len();
    let n = seg.n_events();
    let w = dim * u;
    let mut g = vec![0.0; n.max(1) * w];
    let mut dg = vec![0.0; (n + 1) * w];

    // g and dg are identically zero on the first interval.
    for k in 1..=n {
        let t_prev = seg.times[k - 1];
        let t_now = if k < n { seg.times[k] } else { seg.end };
        let dt = t_now - t_prev;
        let prev_type = seg.types[k - 1];
        for m in 0..dim {
            for (ui, &beta) in decays.betas().iter().enumerate() {
                let mut h = g[((k - 1) * dim + m) * u + ui];
                if m == prev_type {
                    h += beta;
                }
                let decay = (-beta * dt).exp();
                if k < n {
                    g[(k * dim + m) * u + ui] = h * decay;
                }
                dg[(k * dim + m) * u + ui] = h * (1.0 - decay) / beta;
            }
        }
    }
    Ok(GGCache {
        dim,
        n_decays: u,
        n_events: n,
        g,
        dg,
    })
}

/// Gradient of the log-likelihood in parameter layout.
#[derive(Debug, Clone)]
pub struct Qrh1Grad {
    /// d L / d mu[l][q].
    pub mu: Vec<Vec<f64>>,
    /// d L / d alpha[l][m][u], same layout as [`KernelCoeffs`].
    pub alpha: KernelCoeffs,
}

/// Reusable evaluation context: segments plus their caches.
///
/// The caches depend only on the data and the decay grid, so a fit
/// computes them once and evaluates the likelihood many times.
pub struct Qrh1Eval {
    pub segments: Vec<SegmentData>,
    caches: Vec<GGCache>,
    dim: usize,
}

impl Qrh1Eval {
    pub fn new(segments: Vec<SegmentData>, decays: &DecaySet, dim: usize) -> Result<Self> {
        let caches = segments
            .iter()
            .map(|s| precompute_gg(s, decays, dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            segments,
            caches,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total event count across segments.
    pub fn n_events(&self) -> usize {
        self.segments.iter().map(|s| s.n_events()).sum()
    }

    /// Log-likelihood; `-inf` when some event has zero intensity under
    /// the supplied parameters.
    pub fn loglik(&self, params: &Qrh1Params) -> Result<f64> {
        self.eval(params, None)
    }

    /// Log-likelihood and its exact gradient.
    pub fn loglik_grad(&self, params: &Qrh1Params) -> Result<(f64, Qrh1Grad)> {
        let mut grad = Qrh1Grad {
            mu: vec![vec![0.0; params.n_states()]; params.dim()],
            alpha: KernelCoeffs::zeros(params.dim(), params.decays.len()),
        };
        let v = self.eval(params, Some(&mut grad))?;
        Ok((v, grad))
    }

    fn eval(&self, params: &Qrh1Params, mut grad: Option<&mut Qrh1Grad>) -> Result<f64> {
        params.validate()?;
        let d = params.dim();
        if d != self.dim {
            return Err(Error::Domain("parameter dimension does not match data".into()));
        }
        let u = params.decays.len();
        let w = d * u;
        let alphas = params.coeffs.flat();
        let mut total = 0.0;

        for (seg, cache) in self.segments.iter().zip(&self.caches) {
            let n = seg.n_events();
            // Event terms.
            for k in 0..n {
                let l = seg.types[k];
                let q = seg.q_before(k);
                if params.gated(l) && q == 0 {
                    return Err(Error::Inconsistent(format!(
                        "queue-consuming event of type {l} at t={} while the queue is empty",
                        seg.times[k]
                    )));
                }
                let s = params.cap_state(q);
                let gk = cache.g_block(k);
                let mut lam = params.mu[l][s];
                let row = &alphas[l * w..(l + 1) * w];
                for i in 0..w {
                    lam += row[i] * gk[i];
                }
                if lam <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                total += lam.ln();
                if let Some(gr) = grad.as_deref_mut() {
                    let inv = 1.0 / lam;
                    gr.mu[l][s] += inv;
                    let arow = &mut gr.alpha.flat_mut()[l * w..(l + 1) * w];
                    for i in 0..w {
                        arow[i] += gk[i] * inv;
                    }
                }
            }
            // Compensator over inter-event intervals plus the tail.
            for k in 0..=n {
                let q_raw = if k == 0 { seg.q0 } else { seg.q_after[k - 1] };
                let s = params.cap_state(q_raw);
                let t_prev = if k == 0 { seg.start } else { seg.times[k - 1] };
                let t_now = if k < n { seg.times[k] } else { seg.end };
                let dt = t_now - t_prev;
                let dgk = cache.dg_block(k);
                for l in 0..d {
                    if params.gated(l) && q_raw == 0 {
                        continue;
                    }
                    total -= params.mu[l][s] * dt;
                    let row = &alphas[l * w..(l + 1) * w];
                    let mut acc = 0.0;
                    for i in 0..w {
                        acc += row[i] * dgk[i];
                    }
                    total -= acc;
                    if let Some(gr) = grad.as_deref_mut() {
                        gr.mu[l][s] -= dt;
                        let arow = &mut gr.alpha.flat_mut()[l * w..(l + 1) * w];
                        for i in 0..w {
                            arow[i] -= dgk[i];
                        }
                    }
                }
            }
        }
        Ok(total)
    }

    /// Occupation time of each capped state, overall and restricted to a
    /// strictly positive queue (the gated compensator support).
    pub fn occupation(&self, q_max: u32) -> (Vec<f64>, Vec<f64>) {
        let n_states = q_max as usize + 1;
        let mut all = vec![0.0; n_states];
        let mut qpos = vec![0.0; n_states];
        for seg in &self.segments {
            let n = seg.n_events();
            for k in 0..=n {
                let q_raw = if k == 0 { seg.q0 } else { seg.q_after[k - 1] };
                let s = (q_raw.min(q_max)) as usize;
                let t_prev = if k == 0 { seg.start } else { seg.times[k - 1] };
                let t_now = if k < n { seg.times[k] } else { seg.end };
                let dt = t_now - t_prev;
                all[s] += dt;
                if q_raw > 0 {
                    qpos[s] += dt;
                }
            }
        }
        (all, qpos)
    }

    /// Event counts per (type, capped state).
    pub fn event_counts(&self, q_max: u32) -> Vec<Vec<u64>> {
        let n_states = q_max as usize + 1;
        let mut counts = vec![vec![0u64; n_states]; self.dim];
        for seg in &self.segments {
            for k in 0..seg.n_events() {
                counts[seg.types[k]][(seg.q_before(k).min(q_max)) as usize] += 1;
            }
        }
        counts
    }
}

/// Log-likelihood of the parameters over a set of segments, treated as
/// independent realizations.
pub fn loglik_qrh1(params: &Qrh1Params, segments: &[SegmentData]) -> Result<f64> {
    Qrh1Eval::new(segments.to_vec(), &params.decays, params.dim())?.loglik(params)
}

/// Log-likelihood and gradients with respect to the baselines and kernel
/// coefficients.
pub fn loglik_grad_qrh1(params: &Qrh1Params, segments: &[SegmentData]) -> Result<(f64, Qrh1Grad)> {
    Qrh1Eval::new(segments.to_vec(), &params.decays, params.dim())?.loglik_grad(params)
}

/// Intensity of type `l` at time `t` given a segment's history strictly
/// before `t`, by direct summation over past events.
///
/// This is the definitional `O(n)` route; the likelihood path goes
/// through the recursions and the two are checked against each other.
pub fn event_intensities(params: &Qrh1Params, seg: &SegmentData) -> Result<Vec<f64>> {
    let eval = Qrh1Eval::new(vec![seg.clone()], &params.decays, params.dim())?;
    let cache = &eval.caches[0];
    let d = params.dim();
    let u = params.decays.len();
    let w = d * u;
    let alphas = params.coeffs.flat();
    let mut out = Vec::with_capacity(seg.n_events());
    for k in 0..seg.n_events() {
        let l = seg.types[k];
        let q = seg.q_before(k);
        let lam = if params.gated(l) && q == 0 {
            0.0
        } else {
            let gk = cache.g_block(k);
            let mut lam = params.mu[l][params.cap_state(q)];
            let row = &alphas[l * w..(l + 1) * w];
            for i in 0..w {
                lam += row[i] * gk[i];
            }
            lam
        };
        out.push(lam);
    }
    Ok(out)
}

/// Direct-summation intensity at an arbitrary time, for spot checks and
/// the simulator's oracle tests.
pub fn intensity_qrh1(params: &Qrh1Params, seg: &SegmentData, l: usize, t: f64) -> Result<f64> {
    if t < seg.start || t > seg.end {
        return Err(Error::Domain(format!("t={t} outside segment")));
    }
    // Queue size just before t.
    let k_before = seg.times.partition_point(|&x| x < t);
    let q = if k_before == 0 {
        seg.q0
    } else {
        seg.q_after[k_before - 1]
    };
    if params.gated(l) && q == 0 {
        return Ok(0.0);
    }
    let mut lam = params.mu[l][params.cap_state(q)];
    for (&tj, &mj) in seg.times.iter().zip(&seg.types) {
        if tj >= t {
            break;
        }
        for (ui, &beta) in params.decays.betas().iter().enumerate() {
            lam += params.coeffs.get(l, mj, ui) * beta * (-beta * (t - tj)).exp();
        }
    }
    Ok(lam)
}

/// Time-rescaling residuals: per event type, the compensator increments
/// between consecutive events of that type (segment-initial increments
/// start at the segment opening; the censored tail increment is
/// discarded). Under the true parameters these are i.i.d. Exp(1).
pub fn time_rescaling_residuals(
    params: &Qrh1Params,
    segments: &[SegmentData],
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let d = params.dim();
    let u = params.decays.len();
    let w = d * u;
    let alphas = params.coeffs.flat();
    let mut residuals = vec![Vec::new(); d];

    for seg in segments {
        let cache = precompute_gg(seg, &params.decays, d)?;
        let n = seg.n_events();
        let mut acc = vec![0.0; d];
        for k in 0..=n {
            let q_raw = if k == 0 { seg.q0 } else { seg.q_after[k - 1] };
            let s = params.cap_state(q_raw);
            let t_prev = if k == 0 { seg.start } else { seg.times[k - 1] };
            let t_now = if k < n { seg.times[k] } else { seg.end };
            let dt = t_now - t_prev;
            let dgk = cache.dg_block(k);
            for l in 0..d {
                if params.gated(l) && q_raw == 0 {
                    continue;
                }
                let row = &alphas[l * w..(l + 1) * w];
                let mut inc = params.mu[l][s] * dt;
                for i in 0..w {
                    inc += row[i] * dgk[i];
                }
                acc[l] += inc;
            }
            if k < n {
                let l = seg.types[k];
                residuals[l].push(acc[l]);
                acc[l] = 0.0;
            }
        }
    }
    Ok(residuals)
}
