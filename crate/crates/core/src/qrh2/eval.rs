//! Likelihood and least-squares objectives of the two-sided model,
//! assembled from the precomputed cache.

use crate::error::{Error, Result};
use crate::kernels::KernelCoeffs;

use super::cache::{LsCache, Qrh2Data};
use super::Qrh2Params;

/// Linear intensity, or its positive part (used with signed kernels).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityMode {
    Linear,
    Clamped,
}

/// Gradient of either objective in parameter layout.
#[derive(Debug, Clone)]
pub struct Qrh2Grad {
    pub mu: Vec<f64>,
    pub alpha: KernelCoeffs,
    pub f: Vec<Vec<f64>>,
}

impl Qrh2Grad {
    fn zeros(params: &Qrh2Params) -> Self {
        Self {
            mu: vec![0.0; params.dim()],
            alpha: KernelCoeffs::zeros(params.dim(), params.decays.len()),
            f: vec![vec![0.0; params.n_states]; params.dim()],
        }
    }
}

/// Log-likelihood and its gradients.
///
/// Requires the linear mode (non-negative kernels); an event whose
/// intensity is non-positive yields `-inf`.
pub fn loglik_qrh2(params: &Qrh2Params, cache: &LsCache) -> Result<(f64, Qrh2Grad)> {
    params.validate()?;
    let d = params.dim();
    let w = cache.width();
    if d != cache.dim || params.n_states != cache.n_states {
        return Err(Error::Domain("parameters do not match cache".into()));
    }
    let alphas = params.coeffs.flat();
    let mut grad = Qrh2Grad::zeros(params);
    let mut total = 0.0;

    // Event terms: log f + log(mu + alpha . g).
    for k in 0..cache.n_events {
        let l = cache.event_type[k];
        let s = cache.event_state[k];
        let gk = cache.g_event(k);
        let row = &alphas[l * w..(l + 1) * w];
        let mut a = params.mu[l];
        for i in 0..w {
            a += row[i] * gk[i];
        }
        if a <= 0.0 || params.f[l][s] <= 0.0 {
            return Ok((f64::NEG_INFINITY, grad));
        }
        total += params.f[l][s].ln() + a.ln();
        let inv = 1.0 / a;
        grad.mu[l] += inv;
        let arow = &mut grad.alpha.flat_mut()[l * w..(l + 1) * w];
        for i in 0..w {
            arow[i] += gk[i] * inv;
        }
        grad.f[l][s] += 1.0 / params.f[l][s];
    }

    // Compensator: sum_l sum_s f[l][s] (mu[l] Dur(s) + alpha . G(s)).
    for l in 0..d {
        let row = &alphas[l * w..(l + 1) * w];
        for s in 0..params.n_states {
            let fls = params.f[l][s];
            let mut slope = params.mu[l] * cache.dur[s];
            for i in 0..w {
                slope += row[i] * cache.g_int(i, s);
            }
            total -= fls * slope;
            grad.f[l][s] -= slope;
            grad.mu[l] -= fls * cache.dur[s];
            let arow = &mut grad.alpha.flat_mut()[l * w..(l + 1) * w];
            for i in 0..w {
                arow[i] -= fls * cache.g_int(i, s);
            }
        }
    }
    Ok((total, grad))
}

/// Least-squares contrast `R = sum_l [ int (lambda_l)^2 dt
/// - 2 sum_k lambda_l(t_k) ]` with its gradients, assembled from the
/// cache in the linear mode. The true intensity is the unique minimizer
/// of this contrast, which stays convex for sign-unrestricted kernels.
pub fn ls_objective(params: &Qrh2Params, cache: &LsCache) -> Result<(f64, Qrh2Grad)> {
    params.validate()?;
    let d = params.dim();
    let w = cache.width();
    if d != cache.dim || params.n_states != cache.n_states {
        return Err(Error::Domain("parameters do not match cache".into()));
    }
    if !cache.has_h() {
        return Err(Error::Input("cache was built without the H table".into()));
    }
    let alphas = params.coeffs.flat();
    let mut grad = Qrh2Grad::zeros(params);
    let mut total = 0.0;

    for l in 0..d {
        let mu = params.mu[l];
        let row = &alphas[l * w..(l + 1) * w];
        let frow = &params.f[l];
        let arow_grad = &mut grad.alpha.flat_mut()[l * w..(l + 1) * w];

        for s in 0..params.n_states {
            let fs = frow[s];
            let f2 = fs * fs;
            let hs = cache.h_int(s);

            // Quadratic pieces: mu^2 Dur + 2 mu alpha.G + alpha' H alpha.
            let mut a_g = 0.0;
            for i in 0..w {
                a_g += row[i] * cache.g_int(i, s);
            }
            let mut h_alpha = vec![0.0; w];
            for i in 0..w {
                let mut acc = 0.0;
                for j in 0..w {
                    acc += hs[i * w + j] * row[j];
                }
                h_alpha[i] = acc;
            }
            let a_h_a: f64 = (0..w).map(|i| row[i] * h_alpha[i]).sum();
            let quad = mu * mu * cache.dur[s] + 2.0 * mu * a_g + a_h_a;

            // Event pieces: mu C(s) + alpha . E(s).
            let mut a_e = 0.0;
            for i in 0..w {
                a_e += row[i] * cache.e_sum(l, i, s);
            }
            let lin = mu * cache.count(l, s) + a_e;

            total += f2 * quad - 2.0 * fs * lin;

            grad.f[l][s] += 2.0 * fs * quad - 2.0 * lin;
            grad.mu[l] += 2.0 * f2 * (mu * cache.dur[s] + a_g) - 2.0 * fs * cache.count(l, s);
            for i in 0..w {
                arow_grad[i] += 2.0 * f2 * (mu * cache.g_int(i, s) + h_alpha[i])
                    - 2.0 * fs * cache.e_sum(l, i, s);
            }
        }
    }
    Ok((total, grad))
}

/// Model intensity of each event's own type at its arrival time, from
/// the cache.
pub fn event_intensities_qrh2(
    params: &Qrh2Params,
    cache: &LsCache,
    mode: IntensityMode,
) -> Result<Vec<f64>> {
    params.validate()?;
    let w = cache.width();
    let alphas = params.coeffs.flat();
    let mut out = Vec::with_capacity(cache.n_events);
    for k in 0..cache.n_events {
        let l = cache.event_type[k];
        let s = cache.event_state[k];
        let gk = cache.g_event(k);
        let row = &alphas[l * w..(l + 1) * w];
        let mut a = params.mu[l];
        for i in 0..w {
            a += row[i] * gk[i];
        }
        if mode == IntensityMode::Clamped {
            a = a.max(0.0);
        }
        out.push(params.f[l][s] * a);
    }
    Ok(out)
}

/// Intensity of type `l` at time `t` by direct summation over the
/// history strictly before `t`; the definitional route used to check the
/// cache.
pub fn intensity_qrh2(
    params: &Qrh2Params,
    data: &Qrh2Data,
    l: usize,
    t: f64,
    mode: IntensityMode,
) -> Result<f64> {
    params.validate()?;
    let state = {
        let i = data.state_times.partition_point(|&x| x <= t);
        if i == 0 {
            return Err(Error::Domain(format!("t={t} before the state path")));
        }
        data.state_vals[i - 1]
    };
    let mut a = params.mu[l];
    for (&tk, &mk) in data.times.iter().zip(&data.types) {
        if tk >= t {
            break;
        }
        for (ui, &beta) in params.decays.betas().iter().enumerate() {
            a += params.coeffs.get(l, mk, ui) * beta * (-beta * (t - tk)).exp();
        }
    }
    if mode == IntensityMode::Clamped {
        a = a.max(0.0);
    }
    Ok(params.f[l][state] * a)
}

/// Time-rescaling residuals per event type over the day.
///
/// With non-negative kernels the compensator increments are exact closed
/// forms; with signed kernels the clamped intensity is integrated by
/// fixed Simpson panels on each inter-knot interval.
pub fn time_rescaling_residuals_qrh2(
    params: &Qrh2Params,
    data: &Qrh2Data,
    mode: IntensityMode,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let d = params.dim();
    let u = params.decays.len();
    let w = d * u;
    data.validate(d, params.n_states)?;
    let betas = params.decays.betas();
    let alphas = params.coeffs.flat();
    let any_negative = alphas.iter().any(|&a| a < 0.0);
    let exact = !(mode == IntensityMode::Clamped && any_negative);

    let mut residuals = vec![Vec::new(); d];
    let mut acc = vec![0.0; d];
    let mut g_cur = vec![0.0; w];
    let mut t_cur = data.t_start;
    let mut sp = data.state_times.partition_point(|&t| t <= data.t_start) - 1;
    let mut state = data.state_vals[sp];
    let mut ev = 0usize;

    loop {
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
        if dt > 0.0 {
            for l in 0..d {
                let row = &alphas[l * w..(l + 1) * w];
                let inc = if exact {
                    let mut inc = params.mu[l] * dt;
                    for i in 0..w {
                        let b = betas[i % u];
                        inc += row[i] * g_cur[i] * (1.0 - (-b * dt).exp()) / b;
                    }
                    inc
                } else {
                    // Simpson panels on max(0, mu + alpha.g(t)).
                    let panels = 32;
                    let h = dt / panels as f64;
                    let a_at = |tau: f64| -> f64 {
                        let mut a = params.mu[l];
                        for i in 0..w {
                            a += row[i] * g_cur[i] * (-betas[i % u] * tau).exp();
                        }
                        a.max(0.0)
                    };
                    let mut acc_q = a_at(0.0) + a_at(dt);
                    for p in 1..panels {
                        let weight = if p % 2 == 1 { 4.0 } else { 2.0 };
                        acc_q += weight * a_at(p as f64 * h);
                    }
                    acc_q * h / 3.0
                };
                acc[l] += params.f[l][state] * inc;
            }
            for i in 0..w {
                g_cur[i] *= (-betas[i % u] * dt).exp();
            }
        }
        t_cur = t_next;
        if is_event {
            let m = data.types[ev];
            residuals[m].push(acc[m]);
            acc[m] = 0.0;
            for ui in 0..u {
                g_cur[m * u + ui] += betas[ui];
            }
            ev += 1;
        } else if next_state.is_some() && t_cur >= data.state_times[sp + 1] {
            sp += 1;
            state = data.state_vals[sp];
        } else {
            break;
        }
    }
    Ok(residuals)
}
