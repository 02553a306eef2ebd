//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use serde::Serialize;

use qrh_core::diagnostics::{
    comparison_report, empirical_conditional_intensity, endogeneity_fraction, f_vs_imbalance,
    ks_test_exp1, model_conditional_intensity, qq_pairs, weighted_intensity_error, KsTest,
};
use qrh_core::kernels::{kernel_norms, stability_check, StabilityReport};
use qrh_core::lob::EventKind8;
use qrh_core::qrh1::{
    event_intensities, fit_hawkes3, fit_qr, fit_qrh1, loglik_qrh1, time_rescaling_residuals,
    FitOptions, FitReport, Qrh1Model,
};
use qrh_core::qrh2::{
    event_intensities_qrh2, fit_qrh2_ls, fit_qrh2_mle, loglik_qrh2, precompute_ls,
    time_rescaling_residuals_qrh2, IntensityMode, Qrh2FitOptions, Qrh2Model,
};
use qrh_core::simulate::{
    invariant_distribution_qrh1, queue_autocorrelation, simulate_qrh1, simulate_qrh2, SimConfig,
    StateSource,
};

use crate::config::RunConfig;
use crate::io_util::{fmt_f64, write_atomic, write_json};
use crate::model_doc::ModelDoc;
use crate::pipeline::{prepare, prepare_two_sided, Prepared, TwoSided};

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}

pub fn cmd_preprocess(config: &RunConfig) -> Result<()> {
    let prep = prepare(config)?;

    let mut seg_csv = String::from("segment_id,side,start,end,p_ref_ticks,q0,n_events\n");
    let mut ev_csv = String::from("segment_id,ts,kind,side,size,q_after\n");
    for (i, seg) in prep.segments.iter().enumerate() {
        let side = match seg.side {
            qrh_core::lob::Side::Bid => "bid",
            qrh_core::lob::Side::Ask => "ask",
        };
        seg_csv.push_str(&format!(
            "{i},{side},{},{},{},{},{}\n",
            fmt_f64(seg.start),
            fmt_f64(seg.end),
            fmt_f64(seg.p_ref_half_ticks as f64 / 2.0),
            seg.q0,
            seg.events.len()
        ));
        for ev in &seg.events {
            ev_csv.push_str(&format!(
                "{i},{},{},{side},{},{}\n",
                fmt_f64(ev.ts),
                ev.kind.label(),
                ev.size,
                ev.q_after
            ));
        }
    }
    write_atomic(&out_path(config, "segments.csv"), seg_csv.as_bytes())?;
    write_atomic(&out_path(config, "events3.csv"), ev_csv.as_bytes())?;

    match prepare_two_sided(config, &prep) {
        Ok(two) => {
            let mut ev8_csv = String::from("ts,kind,state\n");
            for (t, (ty, s)) in two
                .day
                .times
                .iter()
                .zip(two.day.types.iter().zip(state_at_events(&two)))
            {
                let kind = EventKind8::from_index(*ty).unwrap();
                ev8_csv.push_str(&format!("{},{},{}\n", fmt_f64(*t), kind.label(), s));
            }
            write_atomic(&out_path(config, "events8.csv"), ev8_csv.as_bytes())?;

            #[derive(Serialize)]
            struct GridDoc<'a> {
                aes: f64,
                grid: &'a qrh_core::lob::StateGrid,
            }
            write_json(
                &out_path(config, "grid.json"),
                &GridDoc {
                    aes: prep.aes,
                    grid: &two.grid,
                },
            )?;
        }
        Err(e) => eprintln!("two-sided preparation skipped: {e}"),
    }
    write_json(&out_path(config, "summary.json"), &prep.summary())?;
    println!(
        "preprocess: {} records, {} segments, AES {:.4}",
        prep.records.len(),
        prep.segments.len(),
        prep.aes
    );
    Ok(())
}

fn state_at_events(two: &TwoSided) -> Vec<usize> {
    let day = &two.day;
    let mut out = Vec::with_capacity(day.times.len());
    let mut sp = 0usize;
    for &t in &day.times {
        while sp + 1 < day.state_times.len() && day.state_times[sp + 1] < t {
            sp += 1;
        }
        out.push(day.state_vals[sp]);
    }
    out
}

/// Full fit report written next to the model document.
#[derive(Serialize)]
struct FitDoc {
    kind: String,
    n_events: usize,
    n_params: usize,
    aic: f64,
    bic: f64,
    stability: StabilityReport,
    report: FitReport,
}

pub fn cmd_fit(config: &RunConfig, model: &str) -> Result<bool> {
    let prep = prepare(config)?;
    let decays = qrh_core::kernels::DecaySet::new(config.betas.clone())?;

    let (doc, report): (ModelDoc, FitReport) = match model {
        "qr" | "hawkes" | "qrh1" => {
            let segments = prep.segment_data(&config.side);
            if segments.is_empty() {
                bail!("no segments met the {}-event threshold", config.min_events_per_segment);
            }
            let opts = FitOptions {
                tol: config.tol,
                max_iter: config.max_iter,
                ..FitOptions::new(decays.clone(), config.q_max)
            };
            let (params, report, missing) = match model {
                "qr" => {
                    let (params, info) = fit_qr(&segments, &opts)?;
                    let objective = loglik_qrh1(&params, &segments)?;
                    (
                        params,
                        FitReport {
                            objective,
                            gradient_sup_norm: 0.0,
                            iterations: 0,
                            converged: true,
                            wall_time_secs: 0.0,
                            trace: vec![objective],
                        },
                        info.missing,
                    )
                }
                "hawkes" => {
                    let (p, r, i) = fit_hawkes3(&segments, &opts)?;
                    (p, r, i.missing)
                }
                _ => {
                    let (p, r, i) = fit_qrh1(&segments, &opts)?;
                    (p, r, i.missing)
                }
            };
            (
                ModelDoc::One(Qrh1Model {
                    kind: model.to_string(),
                    params,
                    aes: Some(prep.aes),
                    asset: config.asset.clone(),
                    window: None,
                    missing_mu: missing,
                }),
                report,
            )
        }
        "qrh2-mle" | "qrh2-ls" | "hawkes8" => {
            let two = prepare_two_sided(config, &prep)?;
            let with_h = model != "qrh2-mle";
            let cache = precompute_ls(&two.day, &decays, 8, two.grid.n_states(), with_h)?;
            let opts = Qrh2FitOptions {
                tol: config.tol.max(1e-10),
                max_sweeps: config.max_sweeps,
                max_inner_iter: config.max_iter,
                fix_f: model == "hawkes8",
            };
            let out = match model {
                "qrh2-ls" => fit_qrh2_ls(&cache, &opts)?,
                "qrh2-mle" => fit_qrh2_mle(&cache, &opts)?,
                _ => fit_qrh2_mle(&cache, &opts)?,
            };
            (
                ModelDoc::Two(Qrh2Model {
                    kind: model.to_string(),
                    params: out.params,
                    grid: two.grid,
                    aes: Some(prep.aes),
                    asset: config.asset.clone(),
                    post_up_redraw: two.post_up,
                    post_down_redraw: two.post_down,
                }),
                out.report,
            )
        }
        other => bail!("unknown model `{other}`; expected qr, hawkes, qrh1, qrh2-mle, qrh2-ls or hawkes8"),
    };

    let (n_events, coeffs) = match &doc {
        ModelDoc::One(m) => (
            prep.segments.iter().map(|s| s.events.len()).sum::<usize>(),
            m.params.coeffs.clone(),
        ),
        ModelDoc::Two(m) => (prep.cls8.events.len(), m.params.coeffs.clone()),
    };
    let stability = stability_check(&coeffs)?;
    let n_params = doc.param_count();
    let (aic, bic) =
        qrh_core::diagnostics::information_criteria(report.objective, n_params, n_events);

    doc.save(&out_path(config, &format!("model-{model}.json")))?;
    let converged = report.converged;
    let objective = report.objective;
    write_json(
        &out_path(config, &format!("fit-report-{model}.json")),
        &FitDoc {
            kind: model.to_string(),
            n_events,
            n_params,
            aic,
            bic,
            stability,
            report,
        },
    )?;
    println!(
        "fit {model}: objective {objective:.6}, converged {converged}, rho {:.4}",
        stability.spectral_radius
    );
    Ok(converged)
}

pub fn cmd_simulate(config: &RunConfig, model_path: &Path, seed: Option<u64>) -> Result<()> {
    let doc = ModelDoc::load(model_path)?;
    let mut sim = SimConfig::new(config.horizon, seed.unwrap_or(config.seed));
    sim.burn_in = config.burn_in;
    sim.sample_interval = config.sample_interval;
    sim.initial_queue = config.initial_queue;

    match doc {
        ModelDoc::One(m) => {
            let path = simulate_qrh1(&m.params, &sim)?;
            let mut csv = String::from("ts,kind,q_after\n");
            for k in 0..path.n_events() {
                let kind = qrh_core::lob::EventKind3::from_index(path.types[k])
                    .map(|k| k.label().to_string())
                    .unwrap_or_else(|| path.types[k].to_string());
                csv.push_str(&format!(
                    "{},{kind},{}\n",
                    fmt_f64(path.times[k]),
                    path.queue_after[k]
                ));
            }
            write_atomic(&out_path(config, "sim-events.csv"), csv.as_bytes())?;

            let invariant = invariant_distribution_qrh1(&m.params, &sim)?;
            let mut dist = String::from("state,probability,std_err\n");
            for (q, (p, se)) in invariant
                .probs
                .iter()
                .zip(&invariant.std_err)
                .enumerate()
            {
                dist.push_str(&format!("{q},{},{}\n", fmt_f64(*p), fmt_f64(*se)));
            }
            write_atomic(&out_path(config, "distribution.csv"), dist.as_bytes())?;

            #[derive(Serialize)]
            struct SimSummary {
                n_events: usize,
                horizon: f64,
                seed: u64,
                stability: StabilityReport,
                n_samples: usize,
            }
            write_json(
                &out_path(config, "sim-summary.json"),
                &SimSummary {
                    n_events: path.n_events(),
                    horizon: sim.horizon,
                    seed: sim.seed,
                    stability: path.stability,
                    n_samples: invariant.n_samples,
                },
            )?;
            println!("simulate: {} events over {} s", path.n_events(), sim.horizon);
        }
        ModelDoc::Two(m) => {
            if m.post_up_redraw.is_empty() || m.post_down_redraw.is_empty() {
                bail!("model lacks post-move redraw laws; refit from data first");
            }
            let initial = (1.max(config.initial_queue), 1.max(config.initial_queue));
            let path = simulate_qrh2(
                &m.params,
                &sim,
                StateSource::Mechanical {
                    grid: &m.grid,
                    initial,
                    post_up: &m.post_up_redraw,
                    post_down: &m.post_down_redraw,
                },
            )?;
            let mut csv = String::from("ts,kind,q_ask,q_bid,state\n");
            for k in 0..path.n_events() {
                let kind = EventKind8::from_index(path.types[k]).unwrap();
                let (qa, qb) = path.queues_after[k];
                csv.push_str(&format!(
                    "{},{},{qa},{qb},{}\n",
                    fmt_f64(path.times[k]),
                    kind.label(),
                    path.state_before[k]
                ));
            }
            write_atomic(&out_path(config, "sim2-events.csv"), csv.as_bytes())?;
            #[derive(Serialize)]
            struct Sim2Summary {
                n_events: usize,
                horizon: f64,
                seed: u64,
                stability: StabilityReport,
            }
            write_json(
                &out_path(config, "sim2-summary.json"),
                &Sim2Summary {
                    n_events: path.n_events(),
                    horizon: sim.horizon,
                    seed: sim.seed,
                    stability: path.stability,
                },
            )?;
            println!("simulate: {} events over {} s", path.n_events(), sim.horizon);
        }
    }
    Ok(())
}

pub fn cmd_diagnose(config: &RunConfig, model_path: &Path) -> Result<()> {
    let prep = prepare(config)?;
    let doc = ModelDoc::load(model_path)?;
    match doc {
        ModelDoc::One(m) => diagnose_qrh1(config, &prep, &m),
        ModelDoc::Two(m) => diagnose_qrh2(config, &prep, &m),
    }
}

fn write_residual_ks(
    config: &RunConfig,
    labels: &[String],
    residuals: &[Vec<f64>],
) -> Result<Vec<Option<KsTest>>> {
    let mut csv = String::from("type,n_residuals,ks_statistic,p_value\n");
    let mut tests = Vec::new();
    for (label, r) in labels.iter().zip(residuals) {
        if r.is_empty() {
            csv.push_str(&format!("{label},0,,\n"));
            tests.push(None);
        } else {
            let t = ks_test_exp1(r)?;
            csv.push_str(&format!(
                "{label},{},{},{}\n",
                t.n,
                fmt_f64(t.statistic),
                fmt_f64(t.p_value)
            ));
            tests.push(Some(t));
        }
    }
    write_atomic(&out_path(config, "residual-ks.csv"), csv.as_bytes())?;
    Ok(tests)
}

fn diagnose_qrh1(config: &RunConfig, prep: &Prepared, model: &Qrh1Model) -> Result<()> {
    let segments = prep.segment_data(&config.side);
    if segments.is_empty() {
        bail!("no segments met the event threshold");
    }
    let params = &model.params;
    let labels: Vec<String> = ["L", "C", "M"].iter().map(|s| s.to_string()).collect();

    let residuals = time_rescaling_residuals(params, &segments)?;
    let ks = write_residual_ks(config, &labels, &residuals)?;

    // Conditional intensity tables over capped queue states.
    let n_states = params.n_states();
    let mut times = Vec::new();
    let mut types = Vec::new();
    let mut states = Vec::new();
    let mut lambdas = Vec::new();
    for seg in &segments {
        let ev = event_intensities(params, seg)?;
        for k in 0..seg.n_events() {
            times.push(seg.times[k]);
            types.push(seg.types[k]);
            states.push(params.cap_state(seg.q_before(k)));
            lambdas.push(ev[k]);
        }
    }
    // Gaps are only meaningful within a segment: recompute per segment
    // and pool, keyed by the pre-event state.
    let mut ci_acc: Vec<(f64, usize)> = vec![(0.0, 0); n_states];
    let mut counts = vec![vec![0u64; n_states]; 3];
    for seg in &segments {
        for k in 0..seg.n_events() {
            let s = params.cap_state(seg.q_before(k));
            counts[seg.types[k]][s] += 1;
            if k > 0 {
                ci_acc[s].0 += seg.times[k] - seg.times[k - 1];
                ci_acc[s].1 += 1;
            }
        }
    }
    let lambda_all: Vec<f64> = ci_acc
        .iter()
        .map(|&(sum, n)| if n == 0 || sum <= 0.0 { f64::NAN } else { n as f64 / sum })
        .collect();
    let mut empirical = vec![vec![f64::NAN; n_states]; 3];
    for s in 0..n_states {
        let total: u64 = (0..3).map(|l| counts[l][s]).sum();
        if total == 0 || !lambda_all[s].is_finite() {
            continue;
        }
        for l in 0..3 {
            empirical[l][s] = lambda_all[s] * counts[l][s] as f64 / total as f64;
        }
    }
    let model_table = model_conditional_intensity(&lambdas, &types, &states, 3, n_states)?;
    let (delta, excluded) = weighted_intensity_error(&empirical, &model_table, &counts, 50);

    let mut csv = String::from(
        "state,occupation,count_L,count_C,count_M,empirical_L,empirical_C,empirical_M,model_L,model_C,model_M\n",
    );
    let eval = qrh_core::qrh1::Qrh1Eval::new(segments.clone(), &params.decays, 3)?;
    let (occ, _) = eval.occupation(params.q_max);
    for s in 0..n_states {
        csv.push_str(&format!(
            "{s},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(occ[s]),
            counts[0][s],
            counts[1][s],
            counts[2][s],
            fmt_f64(empirical[0][s]),
            fmt_f64(empirical[1][s]),
            fmt_f64(empirical[2][s]),
            fmt_f64(model_table[0][s]),
            fmt_f64(model_table[1][s]),
            fmt_f64(model_table[2][s])
        ));
    }
    write_atomic(&out_path(config, "conditional-intensity.csv"), csv.as_bytes())?;

    // Endogeneity from a long simulation of the fitted model.
    let mut sim = SimConfig::new(config.horizon, config.seed);
    sim.burn_in = config.burn_in;
    sim.sample_interval = config.sample_interval;
    sim.initial_queue = config.initial_queue;
    let path = simulate_qrh1(params, &sim)?;
    let endo = endogeneity_fraction(params, &path, 10.0 * config.sample_interval)?;
    let mut csv = String::from("state,occupation,e_L,e_C,e_M\n");
    for s in 0..n_states {
        csv.push_str(&format!(
            "{s},{},{},{},{}\n",
            fmt_f64(endo.occupation[s]),
            fmt_f64(endo.per_state[0][s]),
            fmt_f64(endo.per_state[1][s]),
            fmt_f64(endo.per_state[2][s])
        ));
    }
    write_atomic(&out_path(config, "endogeneity.csv"), csv.as_bytes())?;

    // Queue autocorrelation of the simulated path on the sampling grid.
    let mut samples = Vec::new();
    let mut t = sim.burn_in;
    while t < sim.horizon {
        samples.push(path.queue_at(t) as f64);
        t += sim.sample_interval;
    }
    // A frozen or constant queue path has no autocorrelation to fit.
    let acf = queue_autocorrelation(&samples, sim.sample_interval, 100.min(samples.len() / 3))
        .unwrap_or(qrh_core::simulate::AutocorrFit {
            rho: vec![],
            amplitude: f64::NAN,
            tau_c: f64::NAN,
        });
    let mut csv = String::from("lag_seconds,rho\n");
    for (j, r) in acf.rho.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", fmt_f64(j as f64 * sim.sample_interval), fmt_f64(*r)));
    }
    write_atomic(&out_path(config, "autocorrelation.csv"), csv.as_bytes())?;

    // Inter-event QQ table: empirical gaps versus gaps simulated with a
    // per-segment memory reset, each simulated realization matching the
    // corresponding empirical segment's length and opening queue.
    let emp_gaps: Vec<f64> = segments
        .iter()
        .flat_map(|s| s.times.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
        .collect();
    let mut sim_gaps: Vec<f64> = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let mut seg_sim = SimConfig::new((seg.end - seg.start).max(1e-6), config.seed + i as u64);
        seg_sim.initial_queue = seg.q0;
        let seg_path = simulate_qrh1(params, &seg_sim)?;
        sim_gaps.extend(seg_path.times.windows(2).map(|w| w[1] - w[0]));
    }
    if !emp_gaps.is_empty() && !sim_gaps.is_empty() {
        let pairs = qq_pairs(&sim_gaps, &emp_gaps, 200)?;
        let mut csv = String::from("model_quantile,empirical_quantile\n");
        for (a, b) in pairs {
            csv.push_str(&format!("{},{}\n", fmt_f64(a), fmt_f64(b)));
        }
        write_atomic(&out_path(config, "qq-inter-event.csv"), csv.as_bytes())?;
    }

    // Invariant queue distribution against the empirical one sampled on
    // the same grid, reported both raw and restricted to q >= 2 (the
    // empirical law is biased at small queues because reference-price
    // changes censor the realizations there).
    let invariant = qrh_core::simulate::invariant_distribution_qrh1(params, &sim)?;
    let mut emp_counts: Vec<f64> = Vec::new();
    for (records, cls) in [(&prep.records, &prep.bid), (&prep.records, &prep.ask)] {
        let qpath = cls.queue_path(records, prep.aes)?;
        let t_start = records[0].ts;
        let t_end = records[records.len() - 1].ts;
        let mut t = t_start;
        while t < t_end {
            if let Some(q) = qpath.value_at(t) {
                let q = q as usize;
                if emp_counts.len() <= q {
                    emp_counts.resize(q + 1, 0.0);
                }
                emp_counts[q] += 1.0;
            }
            t += config.sample_interval;
        }
    }
    let emp_total: f64 = emp_counts.iter().sum();
    let (tv_raw, tv_q2) = if emp_total > 0.0 {
        let empirical: Vec<f64> = emp_counts.iter().map(|c| c / emp_total).collect();
        let tv_raw = invariant.tv_distance(&empirical);
        let restrict = |p: &[f64]| -> Vec<f64> {
            let tail: f64 = p.iter().skip(2).sum();
            if tail > 0.0 {
                p.iter().skip(2).map(|x| x / tail).collect()
            } else {
                Vec::new()
            }
        };
        let inv_q2 = restrict(&invariant.probs);
        let emp_q2 = restrict(&empirical);
        let mut tv_q2 = 0.0;
        for i in 0..inv_q2.len().max(emp_q2.len()) {
            let a = inv_q2.get(i).copied().unwrap_or(0.0);
            let b = emp_q2.get(i).copied().unwrap_or(0.0);
            tv_q2 += (a - b).abs();
        }
        (Some(tv_raw), Some(tv_q2 / 2.0))
    } else {
        (None, None)
    };

    #[derive(Serialize)]
    struct Diag1Summary {
        kind: String,
        log_likelihood: f64,
        stability: StabilityReport,
        ks: Vec<Option<KsTest>>,
        delta: Vec<f64>,
        delta_excluded_states: Vec<Vec<usize>>,
        tau_c: f64,
        autocorr_amplitude: f64,
        endogeneity_pooled: Vec<f64>,
        tv_invariant_vs_empirical: Option<f64>,
        tv_invariant_vs_empirical_q2plus: Option<f64>,
    }
    write_json(
        &out_path(config, "diagnose-summary.json"),
        &Diag1Summary {
            kind: model.kind.clone(),
            log_likelihood: loglik_qrh1(params, &segments)?,
            stability: stability_check(&params.coeffs)?,
            ks,
            delta,
            delta_excluded_states: excluded,
            tau_c: acf.tau_c,
            autocorr_amplitude: acf.amplitude,
            endogeneity_pooled: endo.pooled,
            tv_invariant_vs_empirical: tv_raw,
            tv_invariant_vs_empirical_q2plus: tv_q2,
        },
    )?;
    println!("diagnose: wrote residual, intensity and endogeneity tables");
    Ok(())
}

fn diagnose_qrh2(config: &RunConfig, prep: &Prepared, model: &Qrh2Model) -> Result<()> {
    let params = &model.params;
    let two = prepare_two_sided(config, prep)?;
    if two.grid.n_states() != params.n_states {
        bail!("model grid does not match the configured bucket count");
    }
    let labels: Vec<String> = (0..8)
        .map(|i| EventKind8::from_index(i).unwrap().label().to_string())
        .collect();
    let mode = if params.coeffs.flat().iter().any(|&a| a < 0.0) {
        IntensityMode::Clamped
    } else {
        IntensityMode::Linear
    };

    let residuals = time_rescaling_residuals_qrh2(params, &two.day, mode)?;
    let ks = write_residual_ks(config, &labels, &residuals)?;

    let cache = precompute_ls(&two.day, &params.decays, 8, params.n_states, false)?;
    let lambdas = event_intensities_qrh2(params, &cache, mode)?;
    let states = state_at_events(&two);
    let ci = empirical_conditional_intensity(
        &two.day.times,
        &two.day.types,
        &states,
        8,
        params.n_states,
    )?;
    let model_table =
        model_conditional_intensity(&lambdas, &two.day.types, &states, 8, params.n_states)?;
    let (delta, excluded) = weighted_intensity_error(&ci.lambda, &model_table, &ci.counts, 50);

    let mut csv = String::from("state,ask_bucket,bid_bucket");
    for l in &labels {
        csv.push_str(&format!(",empirical_{l},model_{l}"));
    }
    csv.push('\n');
    for s in 0..params.n_states {
        let (a, b) = two.grid.unflatten(s);
        csv.push_str(&format!("{s},{a},{b}"));
        for l in 0..8 {
            csv.push_str(&format!(
                ",{},{}",
                fmt_f64(ci.lambda[l][s]),
                fmt_f64(model_table[l][s])
            ));
        }
        csv.push('\n');
    }
    write_atomic(&out_path(config, "conditional-intensity.csv"), csv.as_bytes())?;

    // Kernel norm matrix.
    let norms = kernel_norms(&params.coeffs);
    let mut csv = String::from("target\\source");
    for l in &labels {
        csv.push_str(&format!(",{l}"));
    }
    csv.push('\n');
    for l in 0..8 {
        csv.push_str(&labels[l].to_string().as_str());
        for m in 0..8 {
            csv.push_str(&format!(",{}", fmt_f64(norms[l][m])));
        }
        csv.push('\n');
    }
    write_atomic(&out_path(config, "kernel-norms.csv"), csv.as_bytes())?;

    // State factors against the median imbalance, from the AES-unit
    // queue path at event times.
    let mut path_times = Vec::with_capacity(prep.cls8.events.len() + 1);
    let mut sizes = Vec::with_capacity(prep.cls8.events.len() + 1);
    path_times.push(two.day.t_start);
    sizes.push((
        qrh_core::lob::bucket_queue(prep.records[0].ask_sz as f64, prep.aes)? as f64,
        qrh_core::lob::bucket_queue(prep.records[0].bid_sz as f64, prep.aes)? as f64,
    ));
    for e in &prep.cls8.events {
        path_times.push(e.ts);
        sizes.push((
            qrh_core::lob::bucket_queue(e.ask_volume_after as f64, prep.aes)? as f64,
            qrh_core::lob::bucket_queue(e.bid_volume_after as f64, prep.aes)? as f64,
        ));
    }
    let rows = f_vs_imbalance(params, &two.grid, &path_times, &sizes, two.day.t_end)?;
    let mut csv = String::from("ask_bucket,bid_bucket,median_imbalance,occupation");
    for l in &labels {
        csv.push_str(&format!(",f_{l}"));
    }
    csv.push('\n');
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}",
            row.ask_bucket,
            row.bid_bucket,
            fmt_f64(row.median_imbalance),
            fmt_f64(row.occupation)
        ));
        for v in &row.f {
            csv.push_str(&format!(",{}", fmt_f64(*v)));
        }
        csv.push('\n');
    }
    write_atomic(&out_path(config, "f-vs-imbalance.csv"), csv.as_bytes())?;

    let directions: Vec<i8> = two
        .day
        .types
        .iter()
        .filter_map(|&t| match t {
            0 => Some(1),
            1 => Some(-1),
            _ => None,
        })
        .collect();

    #[derive(Serialize)]
    struct Diag2Summary {
        kind: String,
        stability: StabilityReport,
        ks: Vec<Option<KsTest>>,
        delta: Vec<f64>,
        delta_excluded_states: Vec<Vec<usize>>,
        mean_reversion_rate: Option<f64>,
    }
    write_json(
        &out_path(config, "diagnose-summary.json"),
        &Diag2Summary {
            kind: model.kind.clone(),
            stability: stability_check(&params.coeffs)?,
            ks,
            delta,
            delta_excluded_states: excluded,
            mean_reversion_rate: qrh_core::qrh2::mean_reversion_rate(&directions).ok(),
        },
    )?;
    println!("diagnose: wrote residual, intensity, kernel-norm and imbalance tables");
    Ok(())
}

pub fn cmd_compare(config: &RunConfig, model_paths: &[PathBuf]) -> Result<()> {
    if model_paths.len() < 2 {
        bail!("compare needs at least two model files");
    }
    let prep = prepare(config)?;
    let docs: Vec<ModelDoc> = model_paths
        .iter()
        .map(|p| ModelDoc::load(p))
        .collect::<Result<_>>()?;
    let one_family = docs.iter().all(|d| matches!(d, ModelDoc::One(_)));
    let two_family = docs.iter().all(|d| matches!(d, ModelDoc::Two(_)));
    if !one_family && !two_family {
        bail!("all compared models must share a family (single-queue or two-sided)");
    }

    let mut entries = Vec::new();
    let n_events;
    if one_family {
        let segments = prep.segment_data(&config.side);
        n_events = segments.iter().map(|s| s.n_events()).sum::<usize>();
        for (doc, path) in docs.iter().zip(model_paths) {
            let ModelDoc::One(m) = doc else { unreachable!() };
            let l = loglik_qrh1(&m.params, &segments)
                .map_err(|e| anyhow!("evaluating {}: {e}", path.display()))?;
            entries.push((m.kind.clone(), l, doc.param_count()));
        }
    } else {
        let two = prepare_two_sided(config, &prep)?;
        n_events = two.day.times.len();
        for (doc, path) in docs.iter().zip(model_paths) {
            let ModelDoc::Two(m) = doc else { unreachable!() };
            let cache = precompute_ls(&two.day, &m.params.decays, 8, m.params.n_states, false)?;
            let (l, _) = loglik_qrh2(&m.params, &cache)
                .map_err(|e| anyhow!("evaluating {}: {e}", path.display()))?;
            if !l.is_finite() {
                bail!(
                    "model {} has non-positive intensities on this data (signed kernels); \
                     its likelihood is undefined",
                    path.display()
                );
            }
            entries.push((m.kind.clone(), l, doc.param_count()));
        }
    }
    let report = comparison_report(&entries, n_events)?;
    write_json(&out_path(config, "comparison.json"), &report)?;
    for m in &report.models {
        println!(
            "{}: L = {:.4}, k = {}, AIC = {:.4}, BIC = {:.4}",
            m.name, m.log_likelihood, m.n_params, m.aic, m.bic
        );
    }
    for t in &report.lr_tests {
        println!(
            "LR {} vs {}: {:.4} (df {}, p = {:.3e}{})",
            t.null,
            t.alternative,
            t.lr,
            t.df,
            t.p_value,
            if t.suspicious { ", suspicious" } else { "" }
        );
    }
    Ok(())
}
