//! Exact simulation by thinning, invariant-distribution estimation and
//! the analytic birth-death stationary law.
//!
//! Between events every exponential kernel decays monotonically, so the
//! total intensity evaluated at the current time (with the positive part
//! of signed kernels) is a valid upper bound until the next event or
//! state refresh. The bound is tightened at every rejection and rebuilt
//! at every acceptance and state change; a bound violation aborts the run
//! as an internal error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{stability_check, StabilityReport};
use crate::lob::StateGrid;
use crate::qrh1::{Qrh1Params, SegmentData};
use crate::qrh2::{Qrh2Data, Qrh2Params};
use crate::rng::Rng;

/// Simulation horizon, seeding and sampling layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub seed: u64,
    pub burn_in: f64,
    /// Book-state sampling period for distribution estimates.
    pub sample_interval: f64,
    /// Initial queue size, AES units.
    pub initial_queue: u32,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            burn_in: 0.0,
            sample_interval: 30.0,
            initial_queue: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > self.burn_in) || self.burn_in < 0.0 {
            return Err(Error::Input("horizon must exceed burn-in >= 0".into()));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::Input("sample interval must be positive".into()));
        }
        Ok(())
    }
}

/// Simulated single-queue path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimPath {
    pub q0: u32,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub types: Vec<usize>,
    pub queue_after: Vec<u32>,
    /// Realized intensity of the event's own type at its arrival.
    pub intensities: Vec<f64>,
    pub stability: StabilityReport,
}

impl SimPath {
    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    /// View the path as one model segment over `[0, horizon]`.
    pub fn to_segment(&self) -> SegmentData {
        SegmentData {
            start: 0.0,
            end: self.horizon,
            q0: self.q0,
            times: self.times.clone(),
            types: self.types.clone(),
            q_after: self.queue_after.clone(),
        }
    }

    /// Queue size at time `t` (right-continuous).
    pub fn queue_at(&self, t: f64) -> u32 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            self.q0
        } else {
            self.queue_after[k - 1]
        }
    }
}

const BOUND_SLACK: f64 = 1.0 + 1e-9;

/// Ogata-style thinning of the single-queue model. Requires non-negative
/// kernels; the stability check result is attached to the path (an
/// unstable parameter set still simulates up to the horizon).
pub fn simulate_qrh1(params: &Qrh1Params, config: &SimConfig) -> Result<SimPath> {
    params.validate()?;
    config.validate()?;
    if params.coeffs.flat().iter().any(|&a| a < 0.0) {
        return Err(Error::Input(
            "thinning bound requires non-negative kernel coefficients".into(),
        ));
    }
    let stability = stability_check(&params.coeffs)?;

    let d = params.dim();
    let u = params.decays.len();
    let betas = params.decays.betas().to_vec();
    let alphas = params.coeffs.flat();
    let w = d * u;
    let mut rng = Rng::new(config.seed);

    let mut t = 0.0f64;
    let mut q = config.initial_queue;
    let mut h = vec![0.0f64; w]; // kernel right-limits at t

    let mut path = SimPath {
        q0: q,
        horizon: config.horizon,
        times: Vec::new(),
        types: Vec::new(),
        queue_after: Vec::new(),
        intensities: Vec::new(),
        stability,
    };

    let intensities = |q: u32, h: &[f64], out: &mut [f64], params: &Qrh1Params| {
        let s = params.cap_state(q);
        for l in 0..d {
            out[l] = if params.gated(l) && q == 0 {
                0.0
            } else {
                let row = &alphas[l * w..(l + 1) * w];
                let mut lam = params.mu[l][s];
                for i in 0..w {
                    lam += row[i] * h[i];
                }
                lam
            };
        }
    };

    let mut lam = vec![0.0; d];
    'outer: loop {
        intensities(q, &h, &mut lam, params);
        let mut bound: f64 = lam.iter().sum();
        if bound <= 0.0 {
            break; // nothing can ever fire again
        }
        loop {
            let wait = rng.exponential(bound);
            if t + wait > config.horizon {
                break 'outer;
            }
            t += wait;
            for i in 0..w {
                h[i] *= (-betas[i % u] * wait).exp();
            }
            intensities(q, &h, &mut lam, params);
            let total: f64 = lam.iter().sum();
            if total > bound * BOUND_SLACK {
                return Err(Error::Internal(format!(
                    "intensity {total} exceeded thinning bound {bound} at t={t}"
                )));
            }
            if rng.uniform() * bound <= total {
                let l = rng.pick_weighted(&lam, total);
                let new_q = (q as i64 + params.deltas[l] as i64).max(0) as u32;
                path.times.push(t);
                path.types.push(l);
                path.intensities.push(lam[l]);
                q = new_q;
                path.queue_after.push(q);
                for ui in 0..u {
                    h[l * u + ui] += betas[ui];
                }
                break; // rebuild the bound from the new state
            }
            bound = total;
        }
    }
    Ok(path)
}

/// Where the two-sided simulator takes its queue states from.
pub enum StateSource<'a> {
    /// Exogenous replay of a historical state path.
    Replay {
        times: &'a [f64],
        states: &'a [usize],
    },
    /// Self-contained queue dynamics: own-side +-1 updates for L/C/M
    /// (floored at one AES unit, since depleting events are midprice
    /// moves by construction) and a redraw of both queues from the
    /// post-move empirical laws after `P+`/`P-`.
    Mechanical {
        grid: &'a StateGrid,
        initial: (u32, u32),
        post_up: &'a [(u32, u32, f64)],
        post_down: &'a [(u32, u32, f64)],
    },
}

/// Simulated two-sided path; `state_times`/`state_vals` trace the state
/// path actually used, so the path converts directly into fit input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sim2Path {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub types: Vec<usize>,
    /// State just before each event.
    pub state_before: Vec<usize>,
    /// Queue sizes after each event (mechanical mode only).
    pub queues_after: Vec<(u32, u32)>,
    pub intensities: Vec<f64>,
    pub state_times: Vec<f64>,
    pub state_vals: Vec<usize>,
    pub stability: StabilityReport,
}

impl Sim2Path {
    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    pub fn to_data(&self) -> Qrh2Data {
        Qrh2Data {
            t_start: 0.0,
            t_end: self.horizon,
            times: self.times.clone(),
            types: self.types.clone(),
            state_times: self.state_times.clone(),
            state_vals: self.state_vals.clone(),
        }
    }
}

/// Thinning of the two-sided model against the clamped intensity.
pub fn simulate_qrh2(
    params: &Qrh2Params,
    config: &SimConfig,
    source: StateSource<'_>,
) -> Result<Sim2Path> {
    params.validate()?;
    config.validate()?;
    let stability = stability_check(&params.coeffs)?;
    let d = params.dim();
    let u = params.decays.len();
    let w = d * u;
    let betas = params.decays.betas().to_vec();
    let alphas = params.coeffs.flat();
    let mut rng = Rng::new(config.seed);

    // Replay cursor or mechanical queue state.
    let mut replay_idx = 0usize;
    let (mut qa, mut qb) = (1u32, 1u32);
    let mut state = match &source {
        StateSource::Replay { times, states } => {
            if times.is_empty() || times[0] > 0.0 || times.len() != states.len() {
                return Err(Error::Input("replay state path must cover the horizon from 0".into()));
            }
            if times.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Input("replay state times must be non-decreasing".into()));
            }
            states[0]
        }
        StateSource::Mechanical { grid, initial, post_up, post_down } => {
            if initial.0 == 0 || initial.1 == 0 {
                return Err(Error::Input("mechanical queues must start positive".into()));
            }
            for dist in [post_up, post_down] {
                if dist.is_empty() || dist.iter().any(|&(a, b, p)| a == 0 || b == 0 || p < 0.0) {
                    return Err(Error::Input(
                        "post-move redraw laws need positive queues and weights".into(),
                    ));
                }
            }
            qa = initial.0;
            qb = initial.1;
            grid.state_index(qa as f64, qb as f64)
        }
    };
    if state >= params.n_states {
        return Err(Error::Input("state index out of range".into()));
    }

    let mut path = Sim2Path {
        horizon: config.horizon,
        times: Vec::new(),
        types: Vec::new(),
        state_before: Vec::new(),
        queues_after: Vec::new(),
        intensities: Vec::new(),
        state_times: vec![0.0],
        state_vals: vec![state],
        stability,
    };

    let clamped = |l: usize, h: &[f64], state: usize, positive_only: bool| -> f64 {
        let row = &alphas[l * w..(l + 1) * w];
        let mut a = params.mu[l];
        for i in 0..w {
            let c = row[i];
            if positive_only && c < 0.0 {
                continue;
            }
            a += c * h[i];
        }
        params.f[l][state] * a.max(0.0)
    };

    let mut t = 0.0f64;
    let mut h = vec![0.0f64; w];
    let mut lam = vec![0.0; d];

    'outer: loop {
        // Refresh horizon: next replay state change, or the global end.
        let refresh = match &source {
            StateSource::Replay { times, .. } => times
                .get(replay_idx + 1)
                .copied()
                .unwrap_or(config.horizon)
                .min(config.horizon),
            StateSource::Mechanical { .. } => config.horizon,
        };
        let mut bound: f64 = (0..d).map(|l| clamped(l, &h, state, true)).sum();
        loop {
            if bound <= 0.0 {
                // Jump straight to the next refresh point.
                let dt = refresh - t;
                for i in 0..w {
                    h[i] *= (-betas[i % u] * dt).exp();
                }
                t = refresh;
            } else {
                let wait = rng.exponential(bound);
                if t + wait > refresh {
                    let dt = refresh - t;
                    for i in 0..w {
                        h[i] *= (-betas[i % u] * dt).exp();
                    }
                    t = refresh;
                } else {
                    t += wait;
                    for i in 0..w {
                        h[i] *= (-betas[i % u] * wait).exp();
                    }
                    for (l, li) in lam.iter_mut().enumerate() {
                        *li = clamped(l, &h, state, false);
                    }
                    let total: f64 = lam.iter().sum();
                    if total > bound * BOUND_SLACK {
                        return Err(Error::Internal(format!(
                            "intensity {total} exceeded thinning bound {bound} at t={t}"
                        )));
                    }
                    let accept = rng.uniform() * bound <= total;
                    if accept {
                        let l = rng.pick_weighted(&lam, total);
                        path.times.push(t);
                        path.types.push(l);
                        path.state_before.push(state);
                        path.intensities.push(lam[l]);
                        if let StateSource::Mechanical { grid, post_up, post_down, .. } = &source
                        {
                            match l {
                                0 | 1 => {
                                    let dist = if l == 0 { post_up } else { post_down };
                                    let total_w: f64 = dist.iter().map(|x| x.2).sum();
                                    let mut pick = rng.uniform() * total_w;
                                    let mut chosen = dist[dist.len() - 1];
                                    for &cand in dist.iter() {
                                        if pick < cand.2 {
                                            chosen = cand;
                                            break;
                                        }
                                        pick -= cand.2;
                                    }
                                    qa = chosen.0;
                                    qb = chosen.1;
                                }
                                2 => qa += 1,                            // limit at ask
                                3 => qb += 1,                            // limit at bid
                                4 | 6 => qa = qa.saturating_sub(1).max(1), // cancel/market at ask
                                5 | 7 => qb = qb.saturating_sub(1).max(1), // cancel/market at bid
                                _ => unreachable!(),
                            }
                            let new_state = grid.state_index(qa as f64, qb as f64);
                            if new_state != state {
                                state = new_state;
                                path.state_times.push(t);
                                path.state_vals.push(state);
                            }
                            path.queues_after.push((qa, qb));
                        }
                        for ui in 0..u {
                            h[l * u + ui] += betas[ui];
                        }
                        break; // rebuild the bound
                    }
                    // Tighten with the positive-part envelope, not the
                    // realized total: inhibited intensities can rise
                    // again as the negative contributions decay away.
                    bound = (0..d).map(|l| clamped(l, &h, state, true)).sum();
                    continue;
                }
            }
            // Reached the refresh point without an event.
            if t >= config.horizon {
                break 'outer;
            }
            if let StateSource::Replay { times, states } = &source {
                if replay_idx + 1 < times.len() && times[replay_idx + 1] <= t {
                    replay_idx += 1;
                    state = states[replay_idx];
                    path.state_times.push(t);
                    path.state_vals.push(state);
                }
            }
            break; // rebuild the bound with the new state
        }
        if t >= config.horizon {
            break;
        }
    }
    Ok(path)
}

/// Empirical distribution from periodic samples of a path, with batch-
/// means standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantEstimate {
    /// Probability of each queue size `0..probs.len()`.
    pub probs: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_samples: usize,
}

impl InvariantEstimate {
    /// Total-variation distance to another law over queue sizes.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        let n = self.probs.len().max(other.len());
        let mut tv = 0.0;
        for i in 0..n {
            let a = self.probs.get(i).copied().unwrap_or(0.0);
            let b = other.get(i).copied().unwrap_or(0.0);
            tv += (a - b).abs();
        }
        tv / 2.0
    }
}

/// Long-run law of the queue size: simulate, then sample the state every
/// `sample_interval` seconds after the burn-in.
pub fn invariant_distribution_qrh1(
    params: &Qrh1Params,
    config: &SimConfig,
) -> Result<InvariantEstimate> {
    let path = simulate_qrh1(params, config)?;
    let mut samples = Vec::new();
    let mut t = config.burn_in;
    while t < config.horizon {
        samples.push(path.queue_at(t));
        t += config.sample_interval;
    }
    if samples.is_empty() {
        return Err(Error::Input("no samples after burn-in".into()));
    }
    let max_q = samples.iter().copied().max().unwrap_or(0) as usize;
    let n = samples.len();
    let mut probs = vec![0.0; max_q + 1];
    for &q in &samples {
        probs[q as usize] += 1.0;
    }
    for p in &mut probs {
        *p /= n as f64;
    }
    // Batch means over consecutive blocks.
    let n_batches = 30.min(n);
    let batch = n / n_batches;
    let mut std_err = vec![0.0; max_q + 1];
    if batch >= 2 && n_batches >= 2 {
        for q in 0..=max_q {
            let mut means = Vec::with_capacity(n_batches);
            for b in 0..n_batches {
                let lo = b * batch;
                let hi = lo + batch;
                let cnt = samples[lo..hi].iter().filter(|&&x| x as usize == q).count();
                means.push(cnt as f64 / batch as f64);
            }
            let m: f64 = means.iter().sum::<f64>() / n_batches as f64;
            let var: f64 =
                means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n_batches - 1) as f64;
            std_err[q] = (var / n_batches as f64).sqrt();
        }
    }
    Ok(InvariantEstimate {
        probs,
        std_err,
        n_samples: n,
    })
}

/// Analytic stationary law of the queue-reactive birth-death chain,
/// truncated at `q_max` and normalized:
/// `pi(q) proportional to prod_{k=1..q} birth(k-1) / death(k)`.
pub fn qr_invariant(params: &Qrh1Params) -> Result<Vec<f64>> {
    params.validate()?;
    let n = params.n_states();
    let birth = |q: usize| -> f64 {
        (0..params.dim())
            .filter(|&l| params.deltas[l] > 0)
            .map(|l| params.mu[l][q])
            .sum()
    };
    let death = |q: usize| -> f64 {
        (0..params.dim())
            .filter(|&l| params.deltas[l] < 0)
            .map(|l| params.mu[l][q])
            .sum()
    };
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut reachable = true;
    for q in 1..n {
        if !reachable || birth(q - 1) <= 0.0 {
            reachable = false;
            continue;
        }
        let d = death(q);
        if d <= 0.0 {
            return Err(Error::NonErgodic(format!(
                "zero death rate at reachable queue size {q}"
            )));
        }
        pi[q] = pi[q - 1] * birth(q - 1) / d;
        if pi[q] > 1e280 {
            // Keep the recursion in range; normalization fixes scale.
            let scale = pi[q];
            for p in pi.iter_mut() {
                *p /= scale;
            }
        }
    }
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonErgodic("stationary mass is not normalizable".into()));
    }
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

/// Empirical autocorrelation of a sampled path and its least-squares
/// exponential fit `rho(t) ~ a exp(-t / tau_c)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutocorrFit {
    /// `rho[j]` at lag `j * dt`, starting at lag zero.
    pub rho: Vec<f64>,
    pub amplitude: f64,
    pub tau_c: f64,
}

pub fn queue_autocorrelation(samples: &[f64], dt: f64, max_lag: usize) -> Result<AutocorrFit> {
    let n = samples.len();
    if n < 3 || max_lag == 0 {
        return Err(Error::Domain("need at least three samples and one lag".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Err(Error::Domain("constant path has no autocorrelation".into()));
    }
    let max_lag = max_lag.min(n - 1);
    let mut rho = Vec::with_capacity(max_lag + 1);
    for j in 0..=max_lag {
        let mut acc = 0.0;
        for i in 0..n - j {
            acc += (samples[i] - mean) * (samples[i + j] - mean);
        }
        rho.push(acc / (n as f64 * var));
    }
    // Regress ln rho on lag time over the initial positive stretch that
    // clears both the sampling noise band and a fixed fraction of the
    // first-lag value; weights rho^2 keep the noisy tail from tilting
    // the fit (delta method: var(ln rho) ~ var(rho) / rho^2).
    let noise = 2.0 / (n as f64).sqrt();
    let floor = noise.max(0.05 * rho[1].max(0.0));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for j in 1..=max_lag {
        if rho[j] <= floor {
            break;
        }
        xs.push(j as f64 * dt);
        ys.push(rho[j].ln());
        ws.push(rho[j] * rho[j]);
    }
    let (amplitude, tau_c) = if xs.len() < 2 {
        (rho[0], 0.0)
    } else {
        let wsum: f64 = ws.iter().sum();
        let mx = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
        let my = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for i in 0..xs.len() {
            sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
            sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        if slope < 0.0 {
            (intercept.exp(), -1.0 / slope)
        } else {
            (rho[0], 0.0)
        }
    };
    Ok(AutocorrFit {
        rho,
        amplitude,
        tau_c,
    })
}
