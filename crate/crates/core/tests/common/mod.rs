//! Shared generators and independent oracles for the integration tests.
//!
//! The oracles deliberately avoid the recursion-based production paths:
//! intensities are direct sums over past events and compensators are
//! Gauss-Legendre quadrature with panels sized to the fastest decay.
//!
//! Not every test target uses every helper.
#![allow(dead_code)]

use qrh_core::kernels::{DecaySet, KernelCoeffs};
use qrh_core::qrh1::{Qrh1Params, SegmentData, DELTAS3};
use qrh_core::rng::Rng;

/// 7-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 7] = [
    -0.9491079123427585,
    -0.7415311855993945,
    -0.4058451513773972,
    0.0,
    0.4058451513773972,
    0.7415311855993945,
    0.9491079123427585,
];
const GL_WEIGHTS: [f64; 7] = [
    0.1294849661688697,
    0.2797053914892766,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892766,
    0.1294849661688697,
];

/// Kernel sums `g[m][u](t)` by direct summation over events strictly
/// before `t`.
pub fn g_direct(seg: &SegmentData, betas: &[f64], dim: usize, t: f64) -> Vec<f64> {
    let u = betas.len();
    let mut g = vec![0.0; dim * u];
    for (&tk, &mk) in seg.times.iter().zip(&seg.types) {
        if tk >= t {
            break;
        }
        for (ui, &b) in betas.iter().enumerate() {
            g[mk * u + ui] += b * (-b * (t - tk)).exp();
        }
    }
    g
}

/// Brute-force log-likelihood: direct-summation event terms plus a
/// Gauss-Legendre compensator with `beta_max * panel <= 1`.
pub fn loglik_brute_force(params: &Qrh1Params, seg: &SegmentData) -> f64 {
    let d = params.dim();
    let betas = params.decays.betas();
    let u = betas.len();
    let beta_max = betas[u - 1];
    let mut total = 0.0;

    // Event terms.
    for k in 0..seg.n_events() {
        let l = seg.types[k];
        let q = seg.q_before(k);
        let g = g_direct(seg, betas, d, seg.times[k]);
        let mut lam = params.mu[l][params.cap_state(q)];
        for m in 0..d {
            for ui in 0..u {
                lam += params.coeffs.get(l, m, ui) * g[m * u + ui];
            }
        }
        total += lam.ln();
    }

    // Compensator, interval by interval.
    let n = seg.n_events();
    for k in 0..=n {
        let q_raw = if k == 0 { seg.q0 } else { seg.q_after[k - 1] };
        let s = params.cap_state(q_raw);
        let a = if k == 0 { seg.start } else { seg.times[k - 1] };
        let b = if k < n { seg.times[k] } else { seg.end };
        if b <= a {
            continue;
        }
        let panels = ((beta_max * (b - a)).ceil() as usize).max(1);
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (node, weight) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                let t = lo + 0.5 * h * (node + 1.0);
                let g = g_direct(seg, betas, d, t);
                for l in 0..d {
                    if params.gated(l) && q_raw == 0 {
                        continue;
                    }
                    let mut lam = params.mu[l][s];
                    for m in 0..d {
                        for ui in 0..u {
                            lam += params.coeffs.get(l, m, ui) * g[m * u + ui];
                        }
                    }
                    total -= 0.5 * h * weight * lam;
                }
            }
        }
    }
    total
}

/// Random stable 3-type parameters with state-dependent baselines.
pub fn random_params3(rng: &mut Rng, q_max: u32, betas: Vec<f64>) -> Qrh1Params {
    let decays = DecaySet::new(betas).unwrap();
    let u = decays.len();
    let mut params = Qrh1Params::zeros3(decays, q_max);
    for l in 0..3 {
        for s in 0..=q_max as usize {
            params.mu[l][s] = 0.2 + 0.8 * rng.uniform();
        }
        // Empty-queue baselines of consuming types never enter the model.
        if DELTAS3[l] < 0 {
            params.mu[l][0] = 0.0;
        }
    }
    // Kernel norms well inside the stability region.
    let mut coeffs = KernelCoeffs::zeros(3, u);
    for l in 0..3 {
        for m in 0..3 {
            let norm = 0.25 * rng.uniform() / 3.0;
            for ui in 0..u {
                coeffs.set(l, m, ui, norm * (0.3 + 0.7 * rng.uniform()) / u as f64);
            }
        }
    }
    params.coeffs = coeffs;
    params
}

/// Random valid segment: a queue walk that only consumes when the queue
/// is positive. Independent of any model dynamics.
pub fn random_segment(rng: &mut Rng, n_events: usize, mean_gap: f64) -> SegmentData {
    let mut t = 0.0;
    let mut q: u32 = 1 + (rng.uniform() * 4.0) as u32;
    let q0 = q;
    let mut times = Vec::with_capacity(n_events);
    let mut types = Vec::with_capacity(n_events);
    let mut q_after = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        t += rng.exponential(1.0 / mean_gap);
        let l = if q == 0 {
            0
        } else {
            (rng.uniform() * 3.0) as usize
        };
        q = (q as i64 + DELTAS3[l] as i64).max(0) as u32;
        times.push(t);
        types.push(l);
        q_after.push(q);
    }
    let end = t + rng.exponential(1.0 / mean_gap);
    SegmentData {
        start: 0.0,
        end,
        q0,
        times,
        types,
        q_after,
    }
}

/// Relative gap between two log-likelihood routes.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Stationary law of a truncated birth-death generator by least squares
/// on `Q^T pi = 0` with the normalization row appended; independent of
/// the product-form formula in the library.
pub fn birth_death_stationary_solve(birth: &[f64], death: &[f64]) -> Vec<f64> {
    let n = birth.len();
    assert_eq!(death.len(), n);
    let mut a = vec![vec![0.0f64; n]; n + 1];
    for q in 0..n {
        if q + 1 < n {
            a[q][q] -= birth[q];
            a[q + 1][q] += birth[q];
        }
        if q > 0 {
            a[q][q] -= death[q];
            a[q - 1][q] += death[q];
        }
    }
    for q in 0..n {
        a[n][q] = 1.0;
    }
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    for i in 0..=n {
        for j in 0..n {
            for k in 0..n {
                ata[j * n + k] += a[i][j] * a[i][k];
            }
            atb[j] += a[i][j] * rhs[i];
        }
    }
    let (pi, _) = qrh_core::linalg::solve_spd(&ata, &atb, n, 1e-12).unwrap();
    pi
}
