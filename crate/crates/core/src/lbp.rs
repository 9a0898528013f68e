//! Loopy belief propagation over the factor graph of model II with
//! Z-channel tests.
//!
//! Variables are community statuses `X_e`, member statuses `U_v` and the
//! observed outcomes `Y_t`. Factors are the community priors, one membership
//! factor per member tying `U_v` to its communities, and one factor per
//! test. Every factor-to-variable message has a closed form that is linear
//! in the factor's degree.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::infection::InfectionParamsII;
use crate::structure::CommunityStructure;
use crate::testing::{TestDesign, TestOutcomes};

/// Messages are stored as `[P(0), P(1)]`.
pub type Msg = [f64; 2];

const FLOOR: f64 = 1e-12;
const UNIFORM: Msg = [0.5, 0.5];

fn normalize(m: Msg) -> Msg {
    let a = m[0].clamp(FLOOR, 1.0);
    let b = m[1].clamp(FLOOR, 1.0);
    let s = a + b;
    [a / s, b / s]
}

fn mul(a: Msg, b: Msg) -> Msg {
    [a[0] * b[0], a[1] * b[1]]
}

#[derive(Debug, Clone)]
struct CommunityLayer {
    q: f64,
    rates: Vec<f64>,
    /// Communities of each member, `S_v`.
    member_comms: Vec<Vec<usize>>,
    /// For community `e`, the pairs `(v, slot)` with `member_comms[v][slot] == e`.
    comm_members: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone)]
enum MemberPrior {
    Community(CommunityLayer),
    Iid(f64),
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    n: usize,
    prior: MemberPrior,
    /// Members of each test, `delta_t`.
    tests: Vec<Vec<usize>>,
    /// For member `v`, the pairs `(t, slot)` with `tests[t][slot] == v`.
    member_tests: Vec<Vec<(usize, usize)>>,
    z: f64,
}

impl FactorGraph {
    fn with_prior(n: usize, prior: MemberPrior, d: &TestDesign, z: f64) -> Result<Self> {
        check_probability("z", z)?;
        if d.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "design over {} members, graph over {n}",
                d.cols()
            )));
        }
        let tests = d.pools().to_vec();
        let mut member_tests = vec![Vec::new(); n];
        for (t, pool) in tests.iter().enumerate() {
            for (slot, &v) in pool.iter().enumerate() {
                member_tests[v].push((t, slot));
            }
        }
        Ok(Self {
            n,
            prior,
            tests,
            member_tests,
            z,
        })
    }

    /// Community-aware graph.
    pub fn new(s: &CommunityStructure, d: &TestDesign, params: &InfectionParamsII, z: f64) -> Result<Self> {
        params.check_against(s)?;
        let member_comms: Vec<Vec<usize>> = (0..s.n()).map(|v| s.communities_of(v).to_vec()).collect();
        let mut comm_members = vec![Vec::new(); s.num_communities()];
        for (v, comms) in member_comms.iter().enumerate() {
            for (slot, &e) in comms.iter().enumerate() {
                comm_members[e].push((v, slot));
            }
        }
        let layer = CommunityLayer {
            q: params.q,
            rates: params.p.clone(),
            member_comms,
            comm_members,
        };
        Self::with_prior(s.n(), MemberPrior::Community(layer), d, z)
    }

    /// Community-agnostic graph: each member infected independently with `p_iid`.
    pub fn iid(n: usize, d: &TestDesign, p_iid: f64, z: f64) -> Result<Self> {
        check_probability("p_iid", p_iid)?;
        Self::with_prior(n, MemberPrior::Iid(p_iid), d, z)
    }

    pub fn num_members(&self) -> usize {
        self.n
    }

    pub fn num_communities(&self) -> usize {
        match &self.prior {
            MemberPrior::Community(l) => l.rates.len(),
            MemberPrior::Iid(_) => 0,
        }
    }

    pub fn num_tests(&self) -> usize {
        self.tests.len()
    }

    /// Variable nodes: communities, members and outcomes.
    pub fn num_variables(&self) -> usize {
        self.num_communities() + self.n + self.tests.len()
    }

    /// Factor nodes: one prior per community, one membership (or prior)
    /// factor per member, one factor per test.
    pub fn num_factors(&self) -> usize {
        self.num_communities() + self.n + self.tests.len()
    }

    /// Variables attached to member `v`'s membership factor.
    pub fn membership_degree(&self, v: usize) -> usize {
        match &self.prior {
            MemberPrior::Community(l) => l.member_comms[v].len() + 1,
            MemberPrior::Iid(_) => 1,
        }
    }

    /// Variables attached to test `t`'s factor, including `Y_t`.
    pub fn test_degree(&self, t: usize) -> usize {
        self.tests[t].len() + 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefState {
    pub iterations: usize,
    pub member_posteriors: Vec<Msg>,
    pub community_posteriors: Vec<Msg>,
    /// Test factor to member, indexed `[t][slot]`.
    pub test_to_member: Vec<Vec<Msg>>,
    /// Member to test factor, indexed `[t][slot]`.
    pub member_to_test: Vec<Vec<Msg>>,
    /// Membership factor to member.
    pub membership_to_member: Vec<Msg>,
    /// Member to membership factor.
    pub member_to_membership: Vec<Msg>,
    /// Membership factor to community, indexed `[v][slot]`.
    pub membership_to_community: Vec<Vec<Msg>>,
    /// Community to membership factor, indexed `[v][slot]`.
    pub community_to_membership: Vec<Vec<Msg>>,
    /// Multiplications spent inside membership factors.
    pub membership_ops: u64,
}

impl BeliefState {
    pub fn member_probs(&self) -> Vec<f64> {
        self.member_posteriors.iter().map(|m| m[1]).collect()
    }

    pub fn community_probs(&self) -> Vec<f64> {
        self.community_posteriors.iter().map(|m| m[1]).collect()
    }
}

/// Products of all entries but one, via prefix and suffix products.
fn leave_one_out(values: &[f64], out: &mut Vec<f64>) {
    let k = values.len();
    out.clear();
    out.resize(k, 1.0);
    let mut acc = 1.0;
    for i in 0..k {
        out[i] = acc;
        acc *= values[i];
    }
    acc = 1.0;
    for i in (0..k).rev() {
        out[i] *= acc;
        acc *= values[i];
    }
}

/// Synchronous sum-product: each round updates every factor-to-variable
/// message from the current variable-to-factor messages, then every
/// variable-to-factor message from the new factor messages. Messages start
/// uniform; outcome leaves send `[1 - y, y]` and community priors `[1 - q, q]`.
pub fn lbp_decode(g: &FactorGraph, y: &TestOutcomes, iters: usize) -> Result<BeliefState> {
    if y.len() != g.tests.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {} tests",
            y.len(),
            g.tests.len()
        )));
    }
    let z = g.z;
    let mut st = BeliefState {
        iterations: 0,
        member_posteriors: vec![UNIFORM; g.n],
        community_posteriors: vec![UNIFORM; g.num_communities()],
        test_to_member: g.tests.iter().map(|p| vec![UNIFORM; p.len()]).collect(),
        member_to_test: g.tests.iter().map(|p| vec![UNIFORM; p.len()]).collect(),
        membership_to_member: vec![UNIFORM; g.n],
        member_to_membership: vec![UNIFORM; g.n],
        membership_to_community: Vec::new(),
        community_to_membership: Vec::new(),
        membership_ops: 0,
    };
    if let MemberPrior::Community(l) = &g.prior {
        st.membership_to_community = l.member_comms.iter().map(|c| vec![UNIFORM; c.len()]).collect();
        st.community_to_membership = st.membership_to_community.clone();
    }

    let mut scratch = Vec::new();
    let mut zeros = Vec::new();
    for _ in 0..iters {
        // test factors -> members
        for (t, pool) in g.tests.iter().enumerate() {
            zeros.clear();
            zeros.extend(st.member_to_test[t].iter().map(|m| m[0]));
            leave_one_out(&zeros, &mut scratch);
            let positive = y.y[t];
            for (slot, &others_clear) in scratch.iter().enumerate().take(pool.len()) {
                let msg = if positive {
                    [(1.0 - z) * (1.0 - others_clear), 1.0 - z]
                } else {
                    [1.0 - (1.0 - z) * (1.0 - others_clear), z]
                };
                st.test_to_member[t][slot] = normalize(msg);
            }
        }
        // membership factors -> members and communities
        match &g.prior {
            MemberPrior::Iid(p) => {
                for m in st.membership_to_member.iter_mut() {
                    *m = normalize([1.0 - p, *p]);
                }
            }
            MemberPrior::Community(l) => {
                for v in 0..g.n {
                    let comms = &l.member_comms[v];
                    zeros.clear();
                    zeros.extend(
                        comms
                            .iter()
                            .zip(&st.community_to_membership[v])
                            .map(|(&e, s)| s[0] + s[1] * (1.0 - l.rates[e])),
                    );
                    let all: f64 = zeros.iter().product();
                    st.membership_to_member[v] = normalize([all, 1.0 - all]);
                    leave_one_out(&zeros, &mut scratch);
                    let w = st.member_to_membership[v];
                    for (slot, &e) in comms.iter().enumerate() {
                        let rest = scratch[slot];
                        let stay = (1.0 - l.rates[e]) * rest;
                        let msg = [w[0] * rest + w[1] * (1.0 - rest), w[0] * stay + w[1] * (1.0 - stay)];
                        st.membership_to_community[v][slot] = normalize(msg);
                    }
                    // one product term per community, a prefix and a suffix
                    // pass, and one output per community
                    st.membership_ops += 4 * comms.len() as u64;
                }
            }
        }
        // members -> factors
        for v in 0..g.n {
            let edges = &g.member_tests[v];
            let mut from_tests = [1.0, 1.0];
            for &(t, slot) in edges {
                from_tests = normalize(mul(from_tests, st.test_to_member[t][slot]));
            }
            st.member_to_membership[v] = from_tests;
            let prior = st.membership_to_member[v];
            // leave-one-out over test messages in each coordinate
            for coord in 0..2 {
                zeros.clear();
                zeros.extend(edges.iter().map(|&(t, slot)| st.test_to_member[t][slot][coord]));
                leave_one_out(&zeros, &mut scratch);
                for (i, &(t, slot)) in edges.iter().enumerate() {
                    st.member_to_test[t][slot][coord] = prior[coord] * scratch[i];
                }
            }
            for &(t, slot) in edges {
                st.member_to_test[t][slot] = normalize(st.member_to_test[t][slot]);
            }
        }
        // communities -> membership factors
        if let MemberPrior::Community(l) = &g.prior {
            let prior = [1.0 - l.q, l.q];
            for members in &l.comm_members {
                for coord in 0..2 {
                    zeros.clear();
                    zeros.extend(
                        members
                            .iter()
                            .map(|&(v, slot)| st.membership_to_community[v][slot][coord]),
                    );
                    leave_one_out(&zeros, &mut scratch);
                    for (i, &(v, slot)) in members.iter().enumerate() {
                        st.community_to_membership[v][slot][coord] = prior[coord] * scratch[i];
                    }
                }
                for &(v, slot) in members {
                    st.community_to_membership[v][slot] = normalize(st.community_to_membership[v][slot]);
                }
            }
        }
        st.iterations += 1;
    }

    for v in 0..g.n {
        let mut b = st.membership_to_member[v];
        for &(t, slot) in &g.member_tests[v] {
            b = normalize(mul(b, st.test_to_member[t][slot]));
        }
        st.member_posteriors[v] = normalize(b);
    }
    if let MemberPrior::Community(l) = &g.prior {
        for (e, members) in l.comm_members.iter().enumerate() {
            let mut b = [1.0 - l.q, l.q];
            for &(v, slot) in members {
                b = normalize(mul(b, st.membership_to_community[v][slot]));
            }
            st.community_posteriors[e] = normalize(b);
        }
    }
    Ok(st)
}

/// Community-agnostic decoding; returns member posteriors `P(U_v = 1 | y)`.
pub fn nc_lbp_decode(d: &TestDesign, y: &TestOutcomes, p_iid: f64, z: f64, iters: usize) -> Result<Vec<f64>> {
    let g = FactorGraph::iid(d.cols(), d, p_iid, z)?;
    Ok(lbp_decode(&g, y, iters)?.member_probs())
}

/// `U_v = 1` iff its posterior is at least `threshold`.
pub fn harden(posteriors: &[f64], threshold: f64) -> Vec<bool> {
    posteriors.iter().map(|&p| p >= threshold).collect()
}

pub const DEFAULT_ITERS: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;

    fn single(y: bool) -> BeliefState {
        let s = CommunityStructure::new(1, vec![vec![0]]).unwrap();
        let d = TestDesign::new(1, vec![vec![0]]).unwrap();
        let p = InfectionParamsII::uniform(0.5, 0.5, 1).unwrap();
        let g = FactorGraph::new(&s, &d, &p, 0.0).unwrap();
        assert_eq!(g.num_variables(), 3);
        assert_eq!(g.num_factors(), 3);
        lbp_decode(&g, &TestOutcomes { z: 0.0, y: vec![y] }, DEFAULT_ITERS).unwrap()
    }

    #[test]
    fn single_member_posteriors() {
        assert!((single(true).member_probs()[0] - 1.0).abs() < 1e-9);
        assert!(single(false).member_probs()[0] < 1e-9);
    }

    #[test]
    fn messages_stay_normalized() {
        let st = single(true);
        for m in st.test_to_member.iter().flatten().chain(st.member_to_test.iter().flatten()) {
            assert!((m[0] + m[1] - 1.0).abs() < 1e-12);
            assert!(m[0] >= 0.0 && m[1] >= 0.0);
        }
    }

    #[test]
    fn harden_is_inclusive() {
        assert_eq!(harden(&[1.0, 0.0, 0.5, 0.4999], 0.5), vec![true, false, true, false]);
    }

    #[test]
    fn iid_prior_zero_stays_clear() {
        let d = TestDesign::new(2, vec![vec![0, 1], vec![1]]).unwrap();
        let y = TestOutcomes { z: 0.2, y: vec![false, false] };
        let post = nc_lbp_decode(&d, &y, 0.0, 0.2, 20).unwrap();
        assert!(post.iter().all(|&p| p < 1e-9));
    }

    #[test]
    fn uncovered_member_keeps_prior() {
        let d = TestDesign::new(2, vec![vec![0]]).unwrap();
        let y = TestOutcomes { z: 0.0, y: vec![false] };
        let post = nc_lbp_decode(&d, &y, 0.3, 0.0, 5).unwrap();
        assert!((post[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn leave_one_out_products() {
        let mut out = Vec::new();
        leave_one_out(&[2.0, 3.0, 0.0], &mut out);
        assert_eq!(out, vec![0.0, 0.0, 6.0]);
    }
}
