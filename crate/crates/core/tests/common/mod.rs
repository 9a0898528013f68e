#![allow(dead_code)]

use community_gt::{CommunityStructure, InfectionParamsII, InfectionState};
use proptest::prelude::*;

/// Small structures: each member picks 1..=max_deg communities out of
/// `f`; communities nobody picked are dropped.
pub fn small_structure(max_n: usize, max_f: usize, max_deg: usize) -> impl Strategy<Value = CommunityStructure> {
    (1..=max_n, 1..=max_f).prop_flat_map(move |(n, f)| {
        let deg = max_deg.min(f);
        proptest::collection::vec(proptest::sample::subsequence((0..f).collect::<Vec<_>>(), 1..=deg), n).prop_map(
            move |picks| {
                let mut communities = vec![Vec::new(); f];
                for (v, es) in picks.iter().enumerate() {
                    for &e in es {
                        communities[e].push(v);
                    }
                }
                communities.retain(|c| !c.is_empty());
                CommunityStructure::new(n, communities).unwrap()
            },
        )
    })
}

pub fn state_from_bits(s: &CommunityStructure, member_bits: u64) -> InfectionState {
    let member_status: Vec<bool> = (0..s.n()).map(|v| member_bits >> v & 1 == 1).collect();
    let community_status = (0..s.num_communities())
        .map(|e| s.community(e).iter().any(|&v| member_status[v]))
        .collect();
    InfectionState {
        community_status,
        member_status,
    }
}

pub fn params_for(s: &CommunityStructure, q: f64, rates: &[f64]) -> InfectionParamsII {
    let p = (0..s.num_communities()).map(|e| rates[e % rates.len()]).collect();
    InfectionParamsII::new(q, p).unwrap()
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

use community_gt::seed;
use community_gt::testing::run_design;
use community_gt::{TestDesign, TestOutcomes};
use rand::seq::SliceRandom;
use rand::Rng;

pub struct TreeInstance {
    pub s: CommunityStructure,
    pub d: TestDesign,
    pub params: InfectionParamsII,
    pub z: f64,
    pub y: TestOutcomes,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Picks up to `k` of `candidates` lying in pairwise distinct DSU
/// components, then merges them with `extra` (if any).
fn pick_distinct(
    rng: &mut impl Rng,
    parent: &mut [usize],
    candidates: &[usize],
    k: usize,
    extra: Option<usize>,
) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.shuffle(rng);
    let mut roots = Vec::new();
    let mut picked = Vec::new();
    for x in order {
        if picked.len() == k {
            break;
        }
        let r = find(parent, x);
        if !roots.contains(&r) {
            roots.push(r);
            picked.push(x);
        }
    }
    for &x in picked.iter().chain(extra.iter()) {
        let (a, b) = (find(parent, x), find(parent, picked[0]));
        parent[a] = b;
    }
    picked.sort_unstable();
    picked
}

/// Random model-II instance whose factor graph (communities, members,
/// membership factors, tests) is a forest, with at most 12 variables.
pub fn tree_instance(seed_value: u64) -> TreeInstance {
    let mut rng = seed::rng(seed_value);
    let f = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=12 - f);
    // variables: communities 0..f, members f..f+n
    let mut parent: Vec<usize> = (0..f + n).collect();
    let comm_vars: Vec<usize> = (0..f).collect();
    let mut member_comms = Vec::with_capacity(n);
    for v in 0..n {
        let k = rng.gen_range(1..=3);
        member_comms.push(pick_distinct(&mut rng, &mut parent, &comm_vars, k, Some(f + v)));
    }
    let used: Vec<usize> = (0..f).filter(|e| member_comms.iter().any(|c| c.contains(e))).collect();
    let mut communities = vec![Vec::new(); used.len()];
    for (v, comms) in member_comms.iter().enumerate() {
        for e in comms {
            communities[used.iter().position(|u| u == e).unwrap()].push(v);
        }
    }
    let s = CommunityStructure::new(n, communities).unwrap();

    let member_vars: Vec<usize> = (f..f + n).collect();
    let t = rng.gen_range(0..=5);
    let pools = (0..t)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            pick_distinct(&mut rng, &mut parent, &member_vars, k, None)
                .into_iter()
                .map(|x| x - f)
                .collect()
        })
        .collect();
    let d = TestDesign::new(n, pools).unwrap();
    let q = rng.gen_range(0.05..0.95);
    let p = (0..s.num_communities()).map(|_| rng.gen_range(0.05..0.95)).collect();
    let params = InfectionParamsII::new(q, p).unwrap();
    let z = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.01..0.4) };
    let truth = community_gt::infection::sample_probabilistic(&s, &params, rng.gen()).unwrap();
    let y = run_design(&d, &truth, z, rng.gen()).unwrap();
    TreeInstance { s, d, params, z, y }
}

fn test_likelihood(d: &TestDesign, y: &TestOutcomes, z: f64, u: u64) -> f64 {
    d.pools()
        .iter()
        .zip(&y.y)
        .map(|(pool, &yt)| {
            let any = pool.iter().any(|&v| u >> v & 1 == 1);
            let p_pos = if any { 1.0 - z } else { 0.0 };
            if yt {
                p_pos
            } else {
                1.0 - p_pos
            }
        })
        .product()
}

/// Exact posteriors `(P(U_v = 1 | y), P(X_e = 1 | y))` by enumerating the
/// joint of all community and member statuses.
pub fn brute_force_posteriors(inst: &TreeInstance) -> (Vec<f64>, Vec<f64>) {
    let (s, params) = (&inst.s, &inst.params);
    let (n, f) = (s.n(), s.num_communities());
    let mut member = vec![0.0; n];
    let mut comm = vec![0.0; f];
    let mut total = 0.0;
    for x in 0u64..1 << f {
        let mut px = 1.0;
        for e in 0..f {
            px *= if x >> e & 1 == 1 { params.q } else { 1.0 - params.q };
        }
        let infect: Vec<f64> = (0..n)
            .map(|v| {
                1.0 - s
                    .communities_of(v)
                    .iter()
                    .filter(|&&e| x >> e & 1 == 1)
                    .map(|&e| 1.0 - params.p[e])
                    .product::<f64>()
            })
            .collect();
        for u in 0u64..1 << n {
            let mut w = px;
            for v in 0..n {
                w *= if u >> v & 1 == 1 { infect[v] } else { 1.0 - infect[v] };
            }
            w *= test_likelihood(&inst.d, &inst.y, inst.z, u);
            total += w;
            for (v, m) in member.iter_mut().enumerate() {
                if u >> v & 1 == 1 {
                    *m += w;
                }
            }
            for (e, c) in comm.iter_mut().enumerate() {
                if x >> e & 1 == 1 {
                    *c += w;
                }
            }
        }
    }
    (
        member.into_iter().map(|m| m / total).collect(),
        comm.into_iter().map(|c| c / total).collect(),
    )
}

/// Exact member posteriors when each member is infected independently with `p`.
pub fn brute_force_iid(d: &TestDesign, y: &TestOutcomes, p: f64, z: f64) -> Vec<f64> {
    let n = d.cols();
    let mut member = vec![0.0; n];
    let mut total = 0.0;
    for u in 0u64..1 << n {
        let k = u.count_ones() as i32;
        let w = p.powi(k) * (1.0 - p).powi(n as i32 - k) * test_likelihood(d, y, z, u);
        total += w;
        for (v, m) in member.iter_mut().enumerate() {
            if u >> v & 1 == 1 {
                *m += w;
            }
        }
    }
    member.into_iter().map(|m| m / total).collect()
}

/// Largest absolute posterior gap between LBP and enumeration on one tree.
pub fn tree_lbp_gap(inst: &TreeInstance, iters: usize) -> f64 {
    use community_gt::lbp::{lbp_decode, nc_lbp_decode, FactorGraph};
    let g = FactorGraph::new(&inst.s, &inst.d, &inst.params, inst.z).unwrap();
    let b = lbp_decode(&g, &inst.y, iters).unwrap();
    let (exact_m, exact_c) = brute_force_posteriors(inst);
    let p_iid = inst.params.mean_infection_prob(&inst.s);
    let nc = nc_lbp_decode(&inst.d, &inst.y, p_iid, inst.z, iters).unwrap();
    let exact_nc = brute_force_iid(&inst.d, &inst.y, p_iid, inst.z);
    b.member_probs()
        .iter()
        .zip(&exact_m)
        .chain(b.community_probs().iter().zip(&exact_c))
        .chain(nc.iter().zip(&exact_nc))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Random structure with at most `max_f` communities of 1..=`max_m`
/// members each, over a shared pool so that overlaps are common.
pub fn bounded_structure(seed_value: u64, max_f: usize, max_m: usize) -> CommunityStructure {
    let mut rng = seed::rng(seed_value);
    let f = rng.gen_range(1..=max_f);
    let sizes: Vec<usize> = (0..f).map(|_| rng.gen_range(1..=max_m)).collect();
    let pool = rng.gen_range(*sizes.iter().max().unwrap()..=sizes.iter().sum::<usize>());
    let raw: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&m| rand::seq::index::sample(&mut rng, pool, m).into_vec())
        .collect();
    let mut used: Vec<usize> = raw.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let communities = raw
        .iter()
        .map(|c| c.iter().map(|v| used.binary_search(v).unwrap()).collect())
        .collect();
    CommunityStructure::new(used.len(), communities).unwrap()
}

/// Random consistent state: random member bits plus random extra
/// infected communities.
pub fn random_state(s: &CommunityStructure, seed_value: u64) -> InfectionState {
    let mut rng = seed::rng(seed_value);
    let mut st = state_from_bits(s, rng.gen());
    for c in st.community_status.iter_mut() {
        *c |= rng.gen_bool(0.3);
    }
    st
}

/// Number of (community set, member set) configurations with the same
/// number of infected communities and the same number of infected members
/// in every partition set as `state`, by enumeration.
pub fn brute_force_configurations(s: &CommunityStructure, state: &InfectionState) -> u128 {
    let k_f = state.community_status.iter().filter(|&&x| x).count() as u32;
    let x_count = (0u64..1 << s.num_communities()).filter(|x| x.count_ones() == k_f).count() as u128;
    let sets: Vec<(u64, u32)> = s
        .partition()
        .iter()
        .flat_map(|cp| cp.sets.clone())
        .map(|d| {
            let mask = d.member_ids.iter().fold(0u64, |m, &v| m | 1 << v);
            let infected = d.member_ids.iter().filter(|&&v| state.member_status[v]).count() as u32;
            (mask, infected)
        })
        .collect();
    let u_count = (0u64..1 << s.n())
        .filter(|u| sets.iter().all(|&(mask, k)| (u & mask).count_ones() == k))
        .count() as u128;
    x_count * u_count
}

/// `F h2(q) + E[sum_v h2(p_v | X)]` by enumerating every community status vector.
pub fn brute_force_entropy(s: &CommunityStructure, params: &InfectionParamsII) -> f64 {
    let f = s.num_communities();
    let mut expected = 0.0;
    for x in 0u64..1 << f {
        let px: f64 = (0..f)
            .map(|e| if x >> e & 1 == 1 { params.q } else { 1.0 - params.q })
            .product();
        let h: f64 = (0..s.n())
            .map(|v| {
                let escape: f64 = s
                    .communities_of(v)
                    .iter()
                    .filter(|&&e| x >> e & 1 == 1)
                    .map(|&e| 1.0 - params.p[e])
                    .product();
                binary_entropy(1.0 - escape)
            })
            .sum();
        expected += px * h;
    }
    f as f64 * binary_entropy(params.q) + expected
}

/// Over all `k_f`-subsets of `F` communities, counts for communities 0 and 1:
/// `(#{0 in, 1 out}, #{exactly one}, #{both}, total)`.
pub fn enumerate_pair(f: usize, k_f: usize) -> (u64, u64, u64, u64) {
    let (mut ordered, mut one, mut both, mut total) = (0, 0, 0, 0);
    for mask in 0u32..1 << f {
        if mask.count_ones() as usize != k_f {
            continue;
        }
        total += 1;
        let (a, b) = (mask & 1 == 1, mask & 2 == 2);
        ordered += (a && !b) as u64;
        one += (a != b) as u64;
        both += (a && b) as u64;
    }
    (ordered, one, both, total)
}
