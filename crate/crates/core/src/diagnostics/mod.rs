//! Model comparison, residual analysis and conditional-intensity
//! diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lob::StateGrid;
use crate::qrh1::Qrh1Params;
use crate::qrh2::Qrh2Params;
use crate::simulate::SimPath;
use crate::special::{chi_square_sf, kolmogorov_sf};

/// `AIC = 2k - 2L`, `BIC = k ln N - 2L`.
pub fn information_criteria(log_likelihood: f64, n_params: usize, n_events: usize) -> (f64, f64) {
    let k = n_params as f64;
    let aic = 2.0 * k - 2.0 * log_likelihood;
    let bic = k * (n_events as f64).ln() - 2.0 * log_likelihood;
    (aic, bic)
}

/// Likelihood-ratio test of nested fits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LrTest {
    pub lr: f64,
    pub df: usize,
    pub p_value: f64,
    /// The alternative scored below the null by more than the optimizer
    /// tolerance, which points at a failed optimization.
    pub suspicious: bool,
}

/// `LR = 2 (L1 - L0)` with the upper-tail chi-square p-value.
pub fn lr_test(l0: f64, l1: f64, df: usize) -> Result<LrTest> {
    if df == 0 {
        return Err(Error::Domain("LR test needs positive degrees of freedom".into()));
    }
    let lr = 2.0 * (l1 - l0);
    let suspicious = lr < -1e-6 * (1.0 + l1.abs());
    let p_value = chi_square_sf(lr.max(0.0), df as f64)?;
    Ok(LrTest {
        lr,
        df,
        p_value,
        suspicious,
    })
}

/// Kolmogorov-Smirnov test result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// KS distance of a sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// KS test against the unit exponential, with the finite-sample
/// correction `lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D` feeding the
/// asymptotic Kolmogorov tail.
pub fn ks_test_exp1(sample: &[f64]) -> Result<KsTest> {
    let d = ks_statistic(sample, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() })?;
    let n = sample.len();
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        n,
    })
}

/// Per-type KS tests of time-rescaling residuals against Exp(1).
pub fn residual_ks_tests(residuals: &[Vec<f64>]) -> Vec<Option<KsTest>> {
    residuals
        .iter()
        .map(|r| if r.is_empty() { None } else { Some(ks_test_exp1(r).ok()?) })
        .collect()
}

/// Matched empirical quantiles of two samples at probabilities
/// `(i + 1/2) / n_quantiles`, ready for a QQ plot.
pub fn qq_pairs(sample_a: &[f64], sample_b: &[f64], n_quantiles: usize) -> Result<Vec<(f64, f64)>> {
    if sample_a.is_empty() || sample_b.is_empty() || n_quantiles == 0 {
        return Err(Error::Domain("qq_pairs needs non-empty samples and quantiles".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let q = |sorted: &[f64], p: f64| -> f64 {
        let idx = ((p * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
        sorted[idx]
    };
    Ok((0..n_quantiles)
        .map(|i| {
            let p = (i as f64 + 0.5) / n_quantiles as f64;
            (q(&a, p), q(&b, p))
        })
        .collect())
}

/// Conditional intensity tables estimated from events alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondIntensity {
    /// All-type intensity per state: inverse mean inter-event time
    /// conditioned on the pre-event state.
    pub lambda_all: Vec<f64>,
    /// Per-type split by event shares, `[type][state]`.
    pub lambda: Vec<Vec<f64>>,
    /// Event counts `[type][state]`.
    pub counts: Vec<Vec<u64>>,
}

/// Empirical conditional intensity: `Lambda(s) = 1 / mean(gap | state)`,
/// split across types by their share of events arriving in each state.
pub fn empirical_conditional_intensity(
    times: &[f64],
    types: &[usize],
    states: &[usize],
    n_types: usize,
    n_states: usize,
) -> Result<CondIntensity> {
    if times.len() != types.len() || times.len() != states.len() {
        return Err(Error::Input("event arrays differ in length".into()));
    }
    let mut gap_sum = vec![0.0; n_states];
    let mut gap_cnt = vec![0usize; n_states];
    let mut counts = vec![vec![0u64; n_states]; n_types];
    for k in 0..times.len() {
        counts[types[k]][states[k]] += 1;
        if k > 0 {
            gap_sum[states[k]] += times[k] - times[k - 1];
            gap_cnt[states[k]] += 1;
        }
    }
    let lambda_all: Vec<f64> = (0..n_states)
        .map(|s| {
            if gap_cnt[s] == 0 || gap_sum[s] <= 0.0 {
                f64::NAN
            } else {
                gap_cnt[s] as f64 / gap_sum[s]
            }
        })
        .collect();
    let mut lambda = vec![vec![f64::NAN; n_states]; n_types];
    for s in 0..n_states {
        let total: u64 = (0..n_types).map(|l| counts[l][s]).sum();
        if total == 0 || !lambda_all[s].is_finite() {
            continue;
        }
        for l in 0..n_types {
            lambda[l][s] = lambda_all[s] * counts[l][s] as f64 / total as f64;
        }
    }
    Ok(CondIntensity {
        lambda_all,
        lambda,
        counts,
    })
}

/// Model-side conditional intensity: the mean of the fitted intensity of
/// each type over that type's events in each state.
pub fn model_conditional_intensity(
    event_lambdas: &[f64],
    types: &[usize],
    states: &[usize],
    n_types: usize,
    n_states: usize,
) -> Result<Vec<Vec<f64>>> {
    if event_lambdas.len() != types.len() || types.len() != states.len() {
        return Err(Error::Input("event arrays differ in length".into()));
    }
    let mut sum = vec![vec![0.0; n_states]; n_types];
    let mut cnt = vec![vec![0usize; n_states]; n_types];
    for k in 0..types.len() {
        sum[types[k]][states[k]] += event_lambdas[k];
        cnt[types[k]][states[k]] += 1;
    }
    Ok((0..n_types)
        .map(|l| {
            (0..n_states)
                .map(|s| {
                    if cnt[l][s] == 0 {
                        f64::NAN
                    } else {
                        sum[l][s] / cnt[l][s] as f64
                    }
                })
                .collect()
        })
        .collect())
}

/// Count-weighted relative error between the empirical and model
/// conditional intensities, per type. States with fewer than
/// `min_events` type events are excluded; their indices are returned.
pub fn weighted_intensity_error(
    empirical: &[Vec<f64>],
    model: &[Vec<f64>],
    counts: &[Vec<u64>],
    min_events: u64,
) -> (Vec<f64>, Vec<Vec<usize>>) {
    let n_types = empirical.len();
    let mut deltas = vec![f64::NAN; n_types];
    let mut excluded = vec![Vec::new(); n_types];
    for l in 0..n_types {
        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..empirical[l].len() {
            if counts[l][s] < min_events {
                if counts[l][s] > 0 {
                    excluded[l].push(s);
                }
                continue;
            }
            let e = empirical[l][s];
            let m = model[l][s];
            if !e.is_finite() || !m.is_finite() {
                excluded[l].push(s);
                continue;
            }
            let w = counts[l][s] as f64;
            num += (e - m).abs() * w;
            den += e * w;
        }
        if den > 0.0 {
            deltas[l] = num / den;
        }
    }
    (deltas, excluded)
}

/// Endogeneity tables: the share of average intensity explained by the
/// Hawkes part, per type and queue state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndogeneityTable {
    /// `e[type][state] = 1 - mu / Lambda`, NaN where undefined.
    pub per_state: Vec<Vec<f64>>,
    /// Occupation-weighted aggregate per type.
    pub pooled: Vec<f64>,
    pub occupation: Vec<f64>,
}

/// Estimate `e[l](q) = 1 - mu[l](q) / Lambda[l](q)` from a simulated
/// path, with `Lambda` the exact time average of the model intensity
/// over each capped state's occupation.
pub fn endogeneity_fraction(
    params: &Qrh1Params,
    path: &SimPath,
    min_occupation: f64,
) -> Result<EndogeneityTable> {
    params.validate()?;
    let d = params.dim();
    let n_states = params.n_states();
    let seg = path.to_segment();
    let cache = crate::qrh1::precompute_gg(&seg, &params.decays, d)?;
    let u = params.decays.len();
    let w = d * u;
    let alphas = params.coeffs.flat();

    let mut occ = vec![0.0; n_states];
    // Occupation restricted to a positive queue: the support of gated
    // types' intensity mass.
    let mut occ_qpos = vec![0.0; n_states];
    let mut mass = vec![vec![0.0; n_states]; d]; // integral of lambda per state
    let n = seg.n_events();
    for k in 0..=n {
        let q_raw = if k == 0 { seg.q0 } else { seg.q_after[k - 1] };
        let s = params.cap_state(q_raw);
        let t_prev = if k == 0 { seg.start } else { seg.times[k - 1] };
        let t_now = if k < n { seg.times[k] } else { seg.end };
        let dt = t_now - t_prev;
        occ[s] += dt;
        if q_raw > 0 {
            occ_qpos[s] += dt;
        }
        for l in 0..d {
            if params.gated(l) && q_raw == 0 {
                continue;
            }
            let row = &alphas[l * w..(l + 1) * w];
            let mut inc = params.mu[l][s] * dt;
            for i in 0..w {
                inc += row[i] * cache.dg_at(k, i / u, i % u);
            }
            mass[l][s] += inc;
        }
    }

    let mut per_state = vec![vec![f64::NAN; n_states]; d];
    let mut pooled = vec![f64::NAN; d];
    for l in 0..d {
        let mut mu_mass = 0.0;
        let mut lam_mass = 0.0;
        for s in 0..n_states {
            let support = if params.gated(l) { occ_qpos[s] } else { occ[s] };
            if support < min_occupation {
                continue;
            }
            let lambda_avg = mass[l][s] / support;
            if lambda_avg > 0.0 {
                per_state[l][s] = 1.0 - params.mu[l][s] / lambda_avg;
            }
            mu_mass += params.mu[l][s] * support;
            lam_mass += mass[l][s];
        }
        if lam_mass > 0.0 {
            pooled[l] = 1.0 - mu_mass / lam_mass;
        }
    }
    Ok(EndogeneityTable {
        per_state,
        pooled,
        occupation: occ,
    })
}

/// One row of the state-factor versus imbalance table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FImbalanceRow {
    pub ask_bucket: usize,
    pub bid_bucket: usize,
    /// Occupation-weighted median imbalance inside the state.
    pub median_imbalance: f64,
    pub occupation: f64,
    /// Fitted `f[l]` for every type.
    pub f: Vec<f64>,
}

/// Tabulate the fitted state factors against the median queue imbalance
/// per state, from a piecewise-constant queue-size path
/// (`sizes[i]` = (ask, bid) holding on `[times[i], times[i+1])`).
pub fn f_vs_imbalance(
    params: &Qrh2Params,
    grid: &StateGrid,
    times: &[f64],
    sizes: &[(f64, f64)],
    t_end: f64,
) -> Result<Vec<FImbalanceRow>> {
    params.validate()?;
    if times.len() != sizes.len() || times.is_empty() {
        return Err(Error::Input("queue path arrays differ in length or are empty".into()));
    }
    if grid.n_states() != params.n_states {
        return Err(Error::Input("grid does not match the state-factor table".into()));
    }
    let mut weighted: Vec<Vec<(f64, f64)>> = vec![Vec::new(); grid.n_states()];
    for i in 0..times.len() {
        let t0 = times[i];
        let t1 = if i + 1 < times.len() { times[i + 1] } else { t_end };
        let dur = (t1 - t0).max(0.0);
        if dur == 0.0 {
            continue;
        }
        let (qa, qb) = sizes[i];
        let imb = crate::lob::imbalance(qb, qa)?;
        let s = grid.state_index(qa, qb);
        weighted[s].push((imb, dur));
    }
    let mut rows = Vec::new();
    for s in 0..grid.n_states() {
        if weighted[s].is_empty() {
            continue;
        }
        let mut pieces = weighted[s].clone();
        pieces.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pieces.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let mut median = pieces[pieces.len() - 1].0;
        for &(imb, dur) in &pieces {
            acc += dur;
            if acc >= total / 2.0 {
                median = imb;
                break;
            }
        }
        let (a, b) = grid.unflatten(s);
        rows.push(FImbalanceRow {
            ask_bucket: a,
            bid_bucket: b,
            median_imbalance: median,
            occupation: total,
            f: (0..params.dim()).map(|l| params.f[l][s]).collect(),
        });
    }
    Ok(rows)
}

/// One fitted model in a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrRow {
    pub null: String,
    pub alternative: String,
    pub lr: f64,
    pub df: usize,
    pub p_value: f64,
    pub suspicious: bool,
}

/// Information criteria for each model plus LR tests for every pair with
/// a parameter-count gap (smaller model as the null).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_events: usize,
    pub models: Vec<ModelSummary>,
    pub lr_tests: Vec<LrRow>,
}

pub fn comparison_report(
    entries: &[(String, f64, usize)],
    n_events: usize,
) -> Result<ComparisonReport> {
    let models: Vec<ModelSummary> = entries
        .iter()
        .map(|(name, l, k)| {
            let (aic, bic) = information_criteria(*l, *k, n_events);
            ModelSummary {
                name: name.clone(),
                log_likelihood: *l,
                n_params: *k,
                aic,
                bic,
            }
        })
        .collect();
    let mut lr_tests = Vec::new();
    for i in 0..entries.len() {
        for j in 0..entries.len() {
            if entries[i].2 < entries[j].2 {
                let df = entries[j].2 - entries[i].2;
                let t = lr_test(entries[i].1, entries[j].1, df)?;
                lr_tests.push(LrRow {
                    null: entries[i].0.clone(),
                    alternative: entries[j].0.clone(),
                    lr: t.lr,
                    df,
                    p_value: t.p_value,
                    suspicious: t.suspicious,
                });
            }
        }
    }
    Ok(ComparisonReport {
        n_events,
        models,
        lr_tests,
    })
}
