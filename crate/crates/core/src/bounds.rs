//! Lower bounds on the number of tests.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::infection::{InfectionParamsII, InfectionState};
use crate::seed;
use crate::structure::CommunityStructure;

/// `log2 C(n, k)`. Exact integer arithmetic for `n <= 64`, log-gamma above.
pub fn log2_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let k = k.min(n - k);
    if n <= 64 {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return Ok((c as f64).log2());
    }
    let ln = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
    Ok(ln.max(0.0) / std::f64::consts::LN_2)
}

/// Binary entropy in bits, with `h2(0) = h2(1) = 0`.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Tests needed to single out `k` of `n` without structure.
pub fn counting_bound(n: usize, k: usize) -> Result<f64> {
    log2_binomial(n as u64, k as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundMethod {
    Exact,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub label: String,
    pub value: f64,
    pub method: BoundMethod,
    /// Standard error of a Monte-Carlo term; zero when exact.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    pub terms: Vec<BoundTerm>,
    pub method: BoundMethod,
}

impl BoundReport {
    fn from_terms(terms: Vec<BoundTerm>) -> Self {
        let value = terms.iter().map(|t| t.value).sum();
        let method = terms
            .iter()
            .find_map(|t| match t.method {
                BoundMethod::MonteCarlo { .. } => Some(t.method),
                BoundMethod::Exact => None,
            })
            .unwrap_or(BoundMethod::Exact);
        Self { value, terms, method }
    }
}

/// Structure-aware bound for a known infection pattern: the infected
/// communities are chosen among `F`, then within every partition set the
/// infected members among its members.
pub fn combinatorial_bound(s: &CommunityStructure, state: &InfectionState) -> Result<BoundReport> {
    state.check_consistent(s)?;
    let k_f = state.community_status.iter().filter(|&&x| x).count();
    let mut terms = vec![BoundTerm {
        label: "communities".into(),
        value: log2_binomial(s.num_communities() as u64, k_f as u64)?,
        method: BoundMethod::Exact,
        std_error: 0.0,
    }];
    for (ci, cp) in s.partition().iter().enumerate() {
        for d in &cp.sets {
            let infected = d.member_ids.iter().filter(|&&v| state.member_status[v]).count();
            terms.push(BoundTerm {
                label: format!("component {ci} set {:?}", d.signature),
                value: log2_binomial(d.member_ids.len() as u64, infected as u64)?,
                method: BoundMethod::Exact,
                std_error: 0.0,
            });
        }
    }
    Ok(BoundReport::from_terms(terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticBoundOptions {
    /// Components with at most this many communities are evaluated exactly.
    pub exact_max_component: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for ProbabilisticBoundOptions {
    fn default() -> Self {
        Self {
            exact_max_component: 20,
            mc_samples: 100_000,
            seed: 0,
        }
    }
}

/// Entropy bound for model II: `F h2(q)` plus, per component, the expected
/// member entropy `sum_v h2(p_v | x_C)` over community statuses `x_C`.
///
/// The exact path sums, for each member, over the statuses of its own
/// communities only; the remaining coordinates of `x_C` marginalize out, so
/// this equals the full `2^|C|` enumeration at a fraction of the cost.
pub fn probabilistic_bound(
    s: &CommunityStructure,
    params: &InfectionParamsII,
    opts: &ProbabilisticBoundOptions,
) -> Result<BoundReport> {
    params.check_against(s)?;
    if opts.mc_samples == 0 {
        return Err(Error::InvalidParameter("mc_samples must be >= 1".into()));
    }
    let mut terms = vec![BoundTerm {
        label: "communities".into(),
        value: s.num_communities() as f64 * h2(params.q),
        method: BoundMethod::Exact,
        std_error: 0.0,
    }];
    let comps = s.components();
    let comp_terms: Vec<BoundTerm> = comps
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            if c.community_ids.len() <= opts.exact_max_component {
                let value = c
                    .member_ids
                    .iter()
                    .map(|&v| member_expected_entropy(s.communities_of(v), params))
                    .sum();
                BoundTerm {
                    label: format!("component {ci}"),
                    value,
                    method: BoundMethod::Exact,
                    std_error: 0.0,
                }
            } else {
                let (value, std_error) = component_entropy_mc(
                    s,
                    params,
                    &c.community_ids,
                    &c.member_ids,
                    opts.mc_samples,
                    seed::derive(opts.seed, &[ci as u64]),
                );
                BoundTerm {
                    label: format!("component {ci}"),
                    value,
                    method: BoundMethod::MonteCarlo {
                        samples: opts.mc_samples,
                    },
                    std_error,
                }
            }
        })
        .collect();
    terms.extend(comp_terms);
    Ok(BoundReport::from_terms(terms))
}

/// `E[h2(p_v | X)]` over the statuses of `v`'s communities.
fn member_expected_entropy(comms: &[usize], params: &InfectionParamsII) -> f64 {
    let d = comms.len();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << d) {
        let mut prob = 1.0;
        let mut escape = 1.0;
        for (j, &e) in comms.iter().enumerate() {
            if mask >> j & 1 == 1 {
                prob *= params.q;
                escape *= 1.0 - params.p[e];
            } else {
                prob *= 1.0 - params.q;
            }
        }
        total += prob * h2(1.0 - escape);
    }
    total
}

/// Monte-Carlo estimate of `E[sum_v h2(p_v | X_C)]` and its standard error.
pub fn component_entropy_mc(
    s: &CommunityStructure,
    params: &InfectionParamsII,
    community_ids: &[usize],
    member_ids: &[usize],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = seed::rng(seed);
    let mut x = vec![false; s.num_communities()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        for &e in community_ids {
            x[e] = rng.gen_bool(params.q);
        }
        let h: f64 = member_ids
            .iter()
            .map(|&v| {
                let escape: f64 = s
                    .communities_of(v)
                    .iter()
                    .filter(|&&e| x[e])
                    .map(|&e| 1.0 - params.p[e])
                    .product();
                h2(1.0 - escape)
            })
            .sum();
        sum += h;
        sum_sq += h * h;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = if samples > 1 {
        ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / m).sqrt())
}
