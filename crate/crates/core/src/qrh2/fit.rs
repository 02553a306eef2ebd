//! Alternating fits of the two-sided model.
//!
//! Maximum likelihood alternates a concave sub-problem in `(mu, alpha)`
//! over the non-negative orthant with the closed-form state factors
//! `f[l](s) = C[l](s) / int_{state=s} (mu[l] + alpha.g) dt`. The
//! least-squares fit alternates exact quadratic solves: the normal
//! equations in `(mu, alpha)` per type (kernel signs unrestricted) and a
//! per-coordinate quadratic for `f`. Both push the gauge `f[l](0) = 1`
//! into `(mu, alpha)` after every sweep, which changes no intensity.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::optim::{spg_minimize, SpgOptions};
use crate::qrh1::FitReport;

use super::cache::LsCache;
use super::eval::{loglik_qrh2, ls_objective};
use super::Qrh2Params;

/// Options for the alternating fits.
#[derive(Debug, Clone)]
pub struct Qrh2FitOptions {
    /// Relative improvement threshold that ends the alternation.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Iteration budget of each inner `(mu, alpha)` maximization (MLE).
    pub max_inner_iter: usize,
    /// Keep `f` frozen at one (fits the plain eight-type Hawkes model).
    pub fix_f: bool,
}

impl Default for Qrh2FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 60,
            max_inner_iter: 5_000,
            fix_f: false,
        }
    }
}

/// Fit outcome: parameters, report and per-(type, state) flags for state
/// factors that had no identifying data and were pinned.
#[derive(Debug, Clone)]
pub struct Qrh2FitResult {
    pub params: Qrh2Params,
    pub report: FitReport,
    pub pinned_f: Vec<(usize, usize)>,
    /// The least-squares normal equations needed a ridge at least once.
    pub ridged: bool,
}

const F_FLOOR: f64 = 1e-8;

/// Maximum-likelihood fit (linear mode, non-negative kernels).
pub fn fit_qrh2_mle(cache: &LsCache, opts: &Qrh2FitOptions) -> Result<Qrh2FitResult> {
    let start = Instant::now();
    let d = cache.dim;
    let u = cache.n_decays;
    let w = d * u;
    let n_states = cache.n_states;

    let decays = decays_of(cache)?;
    let mut params = Qrh2Params::flat(decays, d, n_states);
    // Half the empirical rates seed the baselines.
    for l in 0..d {
        let n_l: f64 = (0..n_states).map(|s| cache.count(l, s)).sum();
        params.mu[l] = 0.5 * n_l / cache.t_total.max(1e-12);
    }
    params.coeffs.flat_mut().fill(0.1 / w as f64);

    let mut pinned = Vec::new();
    let mut trace = Vec::new();
    let mut last = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0usize;
    let mut grad_norm = f64::NAN;

    for _sweep in 0..opts.max_sweeps {
        // (a) concave sub-problem in (mu, alpha) with f fixed.
        let x0: Vec<f64> = params
            .mu
            .iter()
            .copied()
            .chain(params.coeffs.flat().iter().copied())
            .collect();
        let lower = vec![0.0; x0.len()];
        let f_snapshot = params.f.clone();
        let spg = spg_minimize(
            |x, g| {
                let mut p = params.clone();
                p.mu.copy_from_slice(&x[..d]);
                p.coeffs.flat_mut().copy_from_slice(&x[d..]);
                p.f = f_snapshot.clone();
                match loglik_qrh2(&p, cache) {
                    Ok((l, grad)) if l.is_finite() => {
                        g[..d].copy_from_slice(&grad.mu);
                        g[d..].copy_from_slice(grad.alpha.flat());
                        g.iter_mut().for_each(|gi| *gi = -*gi);
                        -l
                    }
                    _ => {
                        g.iter_mut().for_each(|gi| *gi = 0.0);
                        f64::INFINITY
                    }
                }
            },
            x0,
            &lower,
            &SpgOptions {
                tol_rel: opts.tol.max(1e-9),
                max_iter: opts.max_inner_iter,
                memory: 10,
            },
        );
        params.mu.copy_from_slice(&spg.x[..d]);
        params.coeffs.flat_mut().copy_from_slice(&spg.x[d..]);
        iterations += spg.iterations;
        grad_norm = spg.pg_sup_norm;

        // (b) closed-form state factors, unless frozen.
        if !opts.fix_f {
            pinned.clear();
            let alphas = params.coeffs.flat();
            for l in 0..d {
                let row = &alphas[l * w..(l + 1) * w];
                for s in 0..n_states {
                    let mut slope = params.mu[l] * cache.dur[s];
                    for i in 0..w {
                        slope += row[i] * cache.g_int(i, s);
                    }
                    if cache.dur[s] <= 0.0 || slope <= 0.0 {
                        params.f[l][s] = 1.0;
                        pinned.push((l, s));
                    } else {
                        let f = cache.count(l, s) / slope;
                        if f < F_FLOOR {
                            params.f[l][s] = F_FLOOR;
                            pinned.push((l, s));
                        } else {
                            params.f[l][s] = f;
                        }
                    }
                }
            }
            params.normalize_gauge()?;
        }

        let (l_now, _) = loglik_qrh2(&params, cache)?;
        trace.push(l_now);
        if (l_now - last).abs() <= opts.tol * (1.0 + l_now.abs()) {
            converged = true;
            last = l_now;
            break;
        }
        last = l_now;
    }

    Ok(Qrh2FitResult {
        params,
        report: FitReport {
            objective: last,
            gradient_sup_norm: grad_norm,
            iterations,
            converged,
            wall_time_secs: start.elapsed().as_secs_f64(),
            trace,
        },
        pinned_f: pinned,
        ridged: false,
    })
}

/// Least-squares fit; kernel coefficients are sign-unrestricted.
pub fn fit_qrh2_ls(cache: &LsCache, opts: &Qrh2FitOptions) -> Result<Qrh2FitResult> {
    let start = Instant::now();
    if !cache.has_h() {
        return Err(Error::Input("least-squares fit needs a cache with the H table".into()));
    }
    let d = cache.dim;
    let u = cache.n_decays;
    let w = d * u;
    let n_states = cache.n_states;

    let decays = decays_of(cache)?;
    let mut params = Qrh2Params::flat(decays, d, n_states);

    let mut pinned = Vec::new();
    let mut ridged = false;
    let mut trace = Vec::new();
    let mut last = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0usize;

    for _sweep in 0..opts.max_sweeps {
        sweeps += 1;
        // (a) exact normal equations per type: minimize
        //     x' M x - 2 b' x  with  x = (mu[l], alpha[l][..]).
        for l in 0..d {
            let dim_x = 1 + w;
            let mut m_mat = vec![0.0; dim_x * dim_x];
            let mut b = vec![0.0; dim_x];
            for s in 0..n_states {
                let fs = params.f[l][s];
                let f2 = fs * fs;
                let hs = cache.h_int(s);
                m_mat[0] += f2 * cache.dur[s];
                for i in 0..w {
                    let gi = cache.g_int(i, s);
                    m_mat[i + 1] += f2 * gi;
                    m_mat[(i + 1) * dim_x] += f2 * gi;
                    for j in 0..w {
                        m_mat[(i + 1) * dim_x + (j + 1)] += f2 * hs[i * w + j];
                    }
                }
                b[0] += fs * cache.count(l, s);
                for i in 0..w {
                    b[i + 1] += fs * cache.e_sum(l, i, s);
                }
            }
            let (x, r) = solve_spd(&m_mat, &b, dim_x, 1e-10)?;
            ridged |= r;
            params.mu[l] = x[0];
            let arow = &mut params.coeffs.flat_mut()[l * w..(l + 1) * w];
            arow.copy_from_slice(&x[1..]);
        }

        // (b) per-coordinate quadratic for f.
        if !opts.fix_f {
            pinned.clear();
            let alphas = params.coeffs.flat().to_vec();
            for l in 0..d {
                let row = &alphas[l * w..(l + 1) * w];
                for s in 0..n_states {
                    let hs = cache.h_int(s);
                    let mut a_g = 0.0;
                    let mut a_e = 0.0;
                    let mut a_h_a = 0.0;
                    for i in 0..w {
                        a_g += row[i] * cache.g_int(i, s);
                        a_e += row[i] * cache.e_sum(l, i, s);
                        let mut hrow = 0.0;
                        for j in 0..w {
                            hrow += hs[i * w + j] * row[j];
                        }
                        a_h_a += row[i] * hrow;
                    }
                    let denom =
                        params.mu[l] * params.mu[l] * cache.dur[s] + 2.0 * params.mu[l] * a_g + a_h_a;
                    let numer = params.mu[l] * cache.count(l, s) + a_e;
                    if denom <= 0.0 {
                        params.f[l][s] = 1.0;
                        pinned.push((l, s));
                    } else {
                        let f = numer / denom;
                        if f < F_FLOOR {
                            params.f[l][s] = F_FLOOR;
                            pinned.push((l, s));
                        } else {
                            params.f[l][s] = f;
                        }
                    }
                }
            }
            params.normalize_gauge()?;
        }

        let (r_now, _) = ls_objective(&params, cache)?;
        trace.push(r_now);
        if (last - r_now).abs() <= opts.tol * (1.0 + r_now.abs()) {
            converged = true;
            break;
        }
        last = r_now;
        if opts.fix_f {
            // The unconstrained-f=1 problem is solved exactly in one sweep.
            converged = true;
            break;
        }
    }

    let (grad_norm, objective) = {
        let (r, grad) = ls_objective(&params, cache)?;
        let mut sup = grad.mu.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        sup = grad.alpha.flat().iter().fold(sup, |a, &g| a.max(g.abs()));
        (sup, r)
    };

    Ok(Qrh2FitResult {
        params,
        report: FitReport {
            objective,
            gradient_sup_norm: grad_norm,
            iterations: sweeps,
            converged,
            wall_time_secs: start.elapsed().as_secs_f64(),
            trace,
        },
        pinned_f: pinned,
        ridged,
    })
}

fn decays_of(cache: &LsCache) -> Result<crate::kernels::DecaySet> {
    cache
        .decays
        .clone()
        .ok_or_else(|| Error::Input("cache is missing its decay grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DecaySet;
    use crate::qrh2::{precompute_ls, Qrh2Data};
    use crate::rng::Rng;

    /// Plain Poisson stream over two states.
    fn poisson_data(seed: u64, rates: &[f64], t_end: f64) -> Qrh2Data {
        let mut rng = Rng::new(seed);
        let total: f64 = rates.iter().sum();
        let mut t = 0.0;
        let mut times = Vec::new();
        let mut types = Vec::new();
        loop {
            t += rng.exponential(total);
            if t >= t_end {
                break;
            }
            times.push(t);
            types.push(rng.pick_weighted(rates, total));
        }
        Qrh2Data {
            t_start: 0.0,
            t_end,
            times,
            types,
            state_times: vec![0.0, t_end / 3.0],
            state_vals: vec![0, 1],
        }
    }

    #[test]
    fn ls_recovers_poisson_rates_with_flat_f() {
        // Roughly 1e5 events, the scale at which the 0.02 norm band holds.
        let data = poisson_data(5, &[0.8, 0.3], 90_000.0);
        let decays = DecaySet::new(vec![1.0, 5.0]).unwrap();
        let cache = precompute_ls(&data, &decays, 2, 2, true).unwrap();
        let out = fit_qrh2_ls(&cache, &Qrh2FitOptions::default()).unwrap();
        assert!(out.report.converged);
        assert!((out.params.mu[0] - 0.8).abs() < 0.05, "mu0 {}", out.params.mu[0]);
        assert!((out.params.mu[1] - 0.3).abs() < 0.03, "mu1 {}", out.params.mu[1]);
        // Pure-Poisson data: kernel norms near zero.
        let norms = crate::kernels::kernel_norms(&out.params.coeffs);
        for row in &norms {
            for &x in row {
                assert!(x.abs() <= 0.02, "norm {x}");
            }
        }
        // f close to one on both states.
        for l in 0..2 {
            for s in 0..2 {
                assert!((out.params.f[l][s] - 1.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn mle_and_ls_agree_on_poisson_baselines() {
        let data = poisson_data(9, &[0.6, 0.4], 3000.0);
        let decays = DecaySet::new(vec![1.0, 5.0]).unwrap();
        let cache = precompute_ls(&data, &decays, 2, 2, true).unwrap();
        let ls = fit_qrh2_ls(&cache, &Qrh2FitOptions::default()).unwrap();
        let mle = fit_qrh2_mle(&cache, &Qrh2FitOptions::default()).unwrap();
        for l in 0..2 {
            assert!(
                (ls.params.mu[l] - mle.params.mu[l]).abs() < 0.08,
                "mu[{l}]: ls {} vs mle {}",
                ls.params.mu[l],
                mle.params.mu[l]
            );
        }
    }

    #[test]
    fn mle_sweeps_are_monotone_in_likelihood() {
        let data = poisson_data(11, &[0.5, 0.5], 1500.0);
        let decays = DecaySet::new(vec![2.0]).unwrap();
        let cache = precompute_ls(&data, &decays, 2, 2, false).unwrap();
        let out = fit_qrh2_mle(&cache, &Qrh2FitOptions::default()).unwrap();
        for w in out.report.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-7, "likelihood decreased: {:?}", w);
        }
    }

    #[test]
    fn fixed_f_equals_flat_table() {
        let data = poisson_data(13, &[0.7, 0.2], 2000.0);
        let decays = DecaySet::new(vec![1.5]).unwrap();
        let cache = precompute_ls(&data, &decays, 2, 2, true).unwrap();
        let opts = Qrh2FitOptions {
            fix_f: true,
            ..Default::default()
        };
        let out = fit_qrh2_ls(&cache, &opts).unwrap();
        assert!(out.params.f.iter().flatten().all(|&f| f == 1.0));
    }
}
