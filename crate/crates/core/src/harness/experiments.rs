use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;

use super::config::{DecoderKind, DesignKind, ExperimentConfig};
use super::{fmt_f64, fmt_opt, Table};
use crate::adaptive::{adaptive_community_test, binary_splitting_all, nonoverlapping_baseline, AdaptiveResult};
use crate::bounds::{combinatorial_bound, counting_bound};
use crate::error::{Error, Result};
use crate::infection::{sample_probabilistic, InfectionParamsII, InfectionState};
use crate::lbp::{harden, lbp_decode, nc_lbp_decode, FactorGraph};
use crate::nonadaptive::{
    build_bernoulli, build_ccw, build_g1, build_g2_example, build_g2_general, build_g2_pairwise_strided,
    ccw_weight, comp_decode, community_comp_decode, community_comp_decode_with_status, G1Mode,
};
use crate::structure::{pairwise_overlap_structure, CommunityStructure};
use crate::testing::{run_design, TestDesign, TestOracle};
use crate::{analysis, seed};

fn error_counts(est: &[bool], truth: &[bool]) -> (usize, usize) {
    est.iter().zip(truth).fold((0, 0), |(fns, fps), (&e, &t)| {
        (fns + (t && !e) as usize, fps + (e && !t) as usize)
    })
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRow {
    pub structure: usize,
    pub trial: usize,
    pub algorithm: &'static str,
    pub theta: f64,
    pub n: usize,
    pub k: usize,
    pub tests: usize,
    pub fn_count: usize,
    pub fp_count: usize,
    pub counting_bound: f64,
    pub community_bound: f64,
    pub wall_ms: Option<f64>,
}

/// Binary splitting, the overlap-unaware community baseline, and the
/// community-aware algorithm at every threshold, on every (structure, trial).
pub fn run_adaptive_experiment(cfg: &ExperimentConfig) -> Result<Vec<AdaptiveRow>> {
    cfg.validate()?;
    let per_structure: Vec<Vec<AdaptiveRow>> = (0..cfg.structures)
        .into_par_iter()
        .map(|i| {
            let s = cfg.build_structure(i)?;
            let params = cfg.build_params(&s, i)?;
            let rows: Vec<Vec<AdaptiveRow>> = (0..cfg.trials)
                .into_par_iter()
                .map(|j| adaptive_trial(cfg, &s, &params, i, j))
                .collect::<Result<_>>()?;
            Ok(rows.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_structure.into_iter().flatten().collect())
}

fn adaptive_trial(
    cfg: &ExperimentConfig,
    s: &CommunityStructure,
    params: &InfectionParamsII,
    i: usize,
    j: usize,
) -> Result<Vec<AdaptiveRow>> {
    let state = sample_probabilistic(s, params, cfg.state_seed(i, j))?;
    let k = state.num_infected();
    let cb = counting_bound(s.n(), k)?;
    let community = combinatorial_bound(s, &state)?.value;
    let timed = |f: &mut dyn FnMut() -> Result<AdaptiveResult>| -> Result<(AdaptiveResult, Option<f64>)> {
        let start = Instant::now();
        let r = f()?;
        Ok((r, cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3)))
    };
    let oracle = |name: &str, extra: &[u64]| TestOracle::new(&state, cfg.z, cfg.run_seed(i, j, name, extra));

    let bsa = timed(&mut || binary_splitting_all(s.n(), &mut oracle("bsa", &[])?))?;
    let nonoverlap = timed(&mut || nonoverlapping_baseline(s, &mut oracle("nonoverlap", &[])?))?;
    let mut rows = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let alg_seed = cfg.run_seed(i, j, "alg1_reps", &[ti as u64]);
        let alg1 = timed(&mut || {
            adaptive_community_test(s, &mut oracle("alg1", &[ti as u64])?, theta, cfg.representatives, alg_seed)
        })?;
        for (name, (r, ms)) in [("bsa", &bsa), ("nonoverlap", &nonoverlap), ("alg1", &alg1)] {
            let (fn_count, fp_count) = error_counts(&r.estimates, &state.member_status);
            rows.push(AdaptiveRow {
                structure: i,
                trial: j,
                algorithm: name,
                theta,
                n: s.n(),
                k,
                tests: r.tests_used,
                fn_count,
                fp_count,
                counting_bound: cb,
                community_bound: community,
                wall_ms: *ms,
            });
        }
    }
    Ok(rows)
}

pub fn adaptive_table(cfg: &ExperimentConfig, rows: &[AdaptiveRow]) -> Table {
    let mut header = vec![
        "structure",
        "trial",
        "algorithm",
        "theta",
        "n",
        "k",
        "tests",
        "fn",
        "fp",
        "counting_bound",
        "community_bound",
    ];
    if cfg.timing {
        header.push("wall_time_ms");
    }
    let mut t = Table::new(&header);
    for r in rows {
        let mut cells = vec![
            r.structure.to_string(),
            r.trial.to_string(),
            r.algorithm.to_string(),
            fmt_f64(r.theta),
            r.n.to_string(),
            r.k.to_string(),
            r.tests.to_string(),
            r.fn_count.to_string(),
            r.fp_count.to_string(),
            fmt_f64(r.counting_bound),
            fmt_f64(r.community_bound),
        ];
        if cfg.timing {
            cells.push(fmt_opt(r.wall_ms.map(fmt_f64)));
        }
        t.rows.push(cells);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonadaptiveRow {
    pub structure: usize,
    pub trial: usize,
    pub t: usize,
    pub design: DesignKind,
    pub decoder: DecoderKind,
    pub alpha: Option<f64>,
    pub w: Option<usize>,
    pub tests: usize,
    pub n: usize,
    pub k: usize,
    pub fn_count: usize,
    pub fp_count: usize,
    pub wall_ms: Option<f64>,
}

/// Probability that the pooled sample of an outer set tests positive.
fn outer_positive_prob(s: &CommunityStructure, params: &InfectionParamsII, members: &[usize]) -> f64 {
    let sig = s.communities_of(members[0]);
    let d = sig.len();
    let mut negative = 0.0;
    for mask in 0u32..(1 << d) {
        let mut prob = 1.0;
        let mut escape = 1.0;
        for (b, &e) in sig.iter().enumerate() {
            if mask >> b & 1 == 1 {
                prob *= params.q;
                escape *= 1.0 - params.p[e];
            } else {
                prob *= 1.0 - params.q;
            }
        }
        negative += prob * escape.powi(members.len() as i32);
    }
    1.0 - negative
}

/// Two-stage design within a budget of `t` tests.
///
/// `G1` gets one test per outer set if that fits in half the budget,
/// otherwise half the budget as a grouped design whose inclusion
/// probability is one over the expected number of positive outer sets.
/// `G2` takes the rest with the smallest pool size `c` whose greedy layout
/// fits.
pub fn g1g2_for_budget(
    s: &CommunityStructure,
    params: &InfectionParamsII,
    t: usize,
    seed: u64,
) -> Result<(TestDesign, TestDesign)> {
    if t < 2 {
        return Err(Error::InvalidParameter("a two-stage design needs T >= 2".into()));
    }
    let outer = s.outer_sets();
    let g1 = if outer.len() <= t / 2 {
        build_g1(s, G1Mode::OnePerOuter)?
    } else {
        let expected: f64 = outer
            .iter()
            .map(|d| outer_positive_prob(s, params, &d.member_ids))
            .sum();
        build_g1(
            s,
            G1Mode::Grouped {
                rows: t / 2,
                inclusion: (1.0 / expected.max(1.0)).min(1.0),
                seed,
            },
        )?
    };
    let t2 = t - g1.rows();
    let mut c = s.n().div_ceil(t2).max(1);
    loop {
        let g2 = build_g2_general(s, c)?;
        if g2.rows() <= t2 {
            return Ok((g1, g2));
        }
        c += 1;
    }
}

struct StructureContext {
    s: CommunityStructure,
    params: InfectionParamsII,
    p_iid: f64,
    k_hat: f64,
}

/// Every configured design/decoder pair over the `T` grid. CCW and
/// Bernoulli designs are run for every `alpha` (column weight or inclusion
/// probability `alpha T / k` resp. `alpha / k`, with `k` the expected number
/// of infected members); [`nonadaptive_summary`] picks the best `alpha`.
pub fn run_nonadaptive_experiment(cfg: &ExperimentConfig) -> Result<Vec<NonadaptiveRow>> {
    cfg.validate()?;
    let per_structure: Vec<Vec<NonadaptiveRow>> = (0..cfg.structures)
        .into_par_iter()
        .map(|i| {
            let s = cfg.build_structure(i)?;
            let params = cfg.build_params(&s, i)?;
            let p_iid = params.mean_infection_prob(&s);
            let ctx = StructureContext {
                k_hat: (p_iid * s.n() as f64).max(1.0),
                s,
                params,
                p_iid,
            };
            let rows: Vec<Vec<NonadaptiveRow>> = cfg
                .t_grid
                .par_iter()
                .map(|&t| nonadaptive_point(cfg, &ctx, i, t))
                .collect::<Result<_>>()?;
            Ok(rows.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_structure.into_iter().flatten().collect())
}

fn nonadaptive_point(cfg: &ExperimentConfig, ctx: &StructureContext, i: usize, t: usize) -> Result<Vec<NonadaptiveRow>> {
    let s = &ctx.s;
    let g1g2 = if cfg.designs.contains(&DesignKind::G1g2) {
        let (g1, g2) = g1g2_for_budget(s, &ctx.params, t, cfg.run_seed(i, 0, "g1", &[t as u64]))?;
        let stacked = TestDesign::stack(&g1, &g2)?;
        Some((g1, g2, stacked))
    } else {
        None
    };
    let graph_needed = cfg.decoders.contains(&DecoderKind::CLbp);
    let mut rows = Vec::new();
    for j in 0..cfg.trials {
        let state = sample_probabilistic(s, &ctx.params, cfg.state_seed(i, j))?;
        let k = state.num_infected();
        let row = |design, decoder, alpha, w, tests, est: &[bool], wall_ms| {
            let (fn_count, fp_count) = error_counts(est, &state.member_status);
            NonadaptiveRow {
                structure: i,
                trial: j,
                t,
                design,
                decoder,
                alpha,
                w,
                tests,
                n: s.n(),
                k,
                fn_count,
                fp_count,
                wall_ms,
            }
        };
        for &design in &cfg.designs {
            match design {
                DesignKind::G1g2 => {
                    let (g1, g2, stacked) = g1g2.as_ref().expect("built above");
                    let start = Instant::now();
                    let y = run_design(stacked, &state, cfg.z, cfg.run_seed(i, j, "g1g2_noise", &[t as u64]))?;
                    let y1 = y.slice(0..g1.rows());
                    let y2 = y.slice(g1.rows()..stacked.rows());
                    let est = community_comp_decode(g1, g2, &y1, &y2, s, cfg.clearing)?;
                    let ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
                    rows.push(row(design, DecoderKind::Comp, None, None, stacked.rows(), &est, ms));
                }
                DesignKind::Ccw | DesignKind::Bernoulli => {
                    for (ai, &alpha) in cfg.alpha_grid.iter().enumerate() {
                        let design_seed = cfg.run_seed(i, j, design.name(), &[t as u64, ai as u64]);
                        let (d, w) = if design == DesignKind::Ccw {
                            let w = ccw_weight(alpha, t, ctx.k_hat);
                            (build_ccw(s.n(), t, w, design_seed)?, Some(w))
                        } else {
                            (build_bernoulli(s.n(), t, (alpha / ctx.k_hat).min(1.0), design_seed)?, None)
                        };
                        let noise = cfg.run_seed(i, j, "noise", &[seed::label(design.name()), t as u64, ai as u64]);
                        let y = run_design(&d, &state, cfg.z, noise)?;
                        let graph = if graph_needed {
                            Some(FactorGraph::new(s, &d, &ctx.params, cfg.z)?)
                        } else {
                            None
                        };
                        for &decoder in &cfg.decoders {
                            let start = Instant::now();
                            let est = match decoder {
                                DecoderKind::Comp => comp_decode(&d, &y)?,
                                DecoderKind::NcLbp => harden(
                                    &nc_lbp_decode(&d, &y, ctx.p_iid, cfg.z, cfg.lbp_iters)?,
                                    cfg.threshold,
                                ),
                                DecoderKind::CLbp => harden(
                                    &lbp_decode(graph.as_ref().expect("built above"), &y, cfg.lbp_iters)?
                                        .member_probs(),
                                    cfg.threshold,
                                ),
                            };
                            let ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
                            rows.push(row(design, decoder, Some(alpha), w, d.rows(), &est, ms));
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn nonadaptive_table(cfg: &ExperimentConfig, rows: &[NonadaptiveRow]) -> Table {
    let mut header = vec![
        "structure", "trial", "T", "design", "decoder", "alpha", "w", "tests", "n", "k", "fn", "fp",
    ];
    if cfg.timing {
        header.push("wall_time_ms");
    }
    let mut t = Table::new(&header);
    for r in rows {
        let mut cells = vec![
            r.structure.to_string(),
            r.trial.to_string(),
            r.t.to_string(),
            r.design.name().to_string(),
            r.decoder.name().to_string(),
            fmt_opt(r.alpha.map(fmt_f64)),
            fmt_opt(r.w),
            r.tests.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.fn_count.to_string(),
            r.fp_count.to_string(),
        ];
        if cfg.timing {
            cells.push(fmt_opt(r.wall_ms.map(fmt_f64)));
        }
        t.rows.push(cells);
    }
    t
}

/// Per-member FN and FP rates for one (T, design, decoder), at the `alpha`
/// with the lowest mean total error rate (ties go to the smaller `alpha`).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub design: DesignKind,
    pub decoder: DecoderKind,
    pub alpha: Option<f64>,
    pub runs: usize,
    pub fn_rate: f64,
    pub fp_rate: f64,
    pub fn_se: f64,
    pub fp_se: f64,
    /// Runs with neither false negatives nor false positives.
    pub exact_runs: usize,
}

pub fn nonadaptive_summary(rows: &[NonadaptiveRow]) -> Vec<SummaryRow> {
    type Key = (usize, DesignKind, DecoderKind);
    let mut groups: BTreeMap<Key, BTreeMap<u64, (Option<f64>, Vec<&NonadaptiveRow>)>> = BTreeMap::new();
    for r in rows {
        let alpha_key = r.alpha.map_or(0, f64::to_bits);
        groups
            .entry((r.t, r.design, r.decoder))
            .or_default()
            .entry(alpha_key)
            .or_insert_with(|| (r.alpha, Vec::new()))
            .1
            .push(r);
    }
    let mut out = Vec::new();
    for ((t, design, decoder), by_alpha) in groups {
        let mut best: Option<SummaryRow> = None;
        let mut best_total = f64::INFINITY;
        let mut candidates: Vec<_> = by_alpha.into_values().collect();
        candidates.sort_by(|a, b| a.0.unwrap_or(0.0).total_cmp(&b.0.unwrap_or(0.0)));
        for (alpha, rs) in candidates {
            let fnr: Vec<f64> = rs.iter().map(|r| r.fn_count as f64 / r.n as f64).collect();
            let fpr: Vec<f64> = rs.iter().map(|r| r.fp_count as f64 / r.n as f64).collect();
            let (fn_rate, fn_se) = mean_se(&fnr);
            let (fp_rate, fp_se) = mean_se(&fpr);
            if fn_rate + fp_rate < best_total {
                best_total = fn_rate + fp_rate;
                best = Some(SummaryRow {
                    t,
                    design,
                    decoder,
                    alpha,
                    runs: rs.len(),
                    fn_rate,
                    fp_rate,
                    fn_se,
                    fp_se,
                    exact_runs: rs.iter().filter(|r| r.fn_count == 0 && r.fp_count == 0).count(),
                });
            }
        }
        out.extend(best);
    }
    out
}

pub fn nonadaptive_summary_table(summary: &[SummaryRow]) -> Table {
    let mut t = Table::new(&[
        "T", "design", "decoder", "alpha", "runs", "fn_rate", "fp_rate", "fn_se", "fp_se", "exact_runs",
    ]);
    for r in summary {
        t.rows.push(vec![
            r.t.to_string(),
            r.design.name().to_string(),
            r.decoder.name().to_string(),
            fmt_opt(r.alpha.map(fmt_f64)),
            r.runs.to_string(),
            fmt_f64(r.fn_rate),
            fmt_f64(r.fp_rate),
            fmt_f64(r.fn_se),
            fmt_f64(r.fp_se),
            r.exact_runs.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub formula: &'static str,
    /// `c` for the two-stage formula, `T` for the Bernoulli one.
    pub x: usize,
    pub formula_value: f64,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Closed-form error rates against simulation.
///
/// Two-stage: pairwise-overlap structure, infected communities known to the
/// decoder, block `G2` (strided variant when `c` does not divide the block
/// counts), COMP on the rest. Bernoulli: exactly `k` of `n` infected,
/// inclusion probability `1/k`, COMP.
pub fn run_formula_validation(cfg: &ExperimentConfig) -> Result<Vec<ValidationRow>> {
    cfg.validate()?;
    let l = &cfg.lemma;
    let s = pairwise_overlap_structure(l.f, l.f_o, l.m, l.m_o)?;
    let params = InfectionParamsII::uniform(l.q, l.p, s.num_communities())?;
    let mut out = Vec::new();
    for &c in &cfg.c_grid {
        let g2 = build_g2_example(l.f, l.f_o, l.m, l.m_o, c)
            .or_else(|_| build_g2_pairwise_strided(l.f, l.f_o, l.m, l.m_o, c))?;
        let rates: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|j| {
                let state = sample_probabilistic(&s, &params, cfg.state_seed(0, j))?;
                let y = run_design(&g2, &state, 0.0, 0)?;
                let est = community_comp_decode_with_status(&state.community_status, &g2, &y, &s)?;
                let (fns, fps) = error_counts(&est, &state.member_status);
                Ok((fns + fps) as f64 / s.n() as f64)
            })
            .collect::<Result<_>>()?;
        let (mean, se) = mean_se(&rates);
        out.push(ValidationRow {
            formula: "two_stage",
            x: c,
            formula_value: analysis::error_rate_model2(l.f, l.f_o, l.m, l.m_o, l.q, l.p, c, s.n())?,
            empirical_mean: mean,
            std_error: se,
            trials: cfg.trials,
        });
    }
    let tr = &cfg.traditional;
    for &t in &cfg.t_grid {
        let formula_value = analysis::error_rate_traditional(tr.n, tr.k, t)?;
        let rates: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|j| {
                let mut rng = seed::rng(cfg.run_seed(0, j, "traditional_state", &[t as u64]));
                let mut member_status = vec![false; tr.n];
                for v in index::sample(&mut rng, tr.n, tr.k) {
                    member_status[v] = true;
                }
                let state = InfectionState {
                    community_status: vec![],
                    member_status,
                };
                let d = build_bernoulli(tr.n, t, 1.0 / tr.k as f64, cfg.run_seed(0, j, "traditional", &[t as u64]))?;
                let y = run_design(&d, &state, 0.0, 0)?;
                let est = comp_decode(&d, &y)?;
                let (fns, fps) = error_counts(&est, &state.member_status);
                Ok((fns + fps) as f64 / tr.n as f64)
            })
            .collect::<Result<_>>()?;
        let (mean, se) = mean_se(&rates);
        out.push(ValidationRow {
            formula: "bernoulli_comp",
            x: t,
            formula_value,
            empirical_mean: mean,
            std_error: se,
            trials: cfg.trials,
        });
    }
    Ok(out)
}

pub fn validation_table(rows: &[ValidationRow]) -> Table {
    let mut t = Table::new(&["formula", "x", "formula_value", "empirical_mean", "std_error", "trials"]);
    for r in rows {
        t.rows.push(vec![
            r.formula.to_string(),
            r.x.to_string(),
            fmt_f64(r.formula_value),
            fmt_f64(r.empirical_mean),
            fmt_f64(r.std_error),
            r.trials.to_string(),
        ]);
    }
    t
}
