//! Infection models over a community structure.
//!
//! Model I (combinatorial) infects exactly `k_f` communities and `k_m`
//! members inside each. Model II (probabilistic) infects each community
//! independently with probability `q`; a member of infected communities is
//! then infected with probability `1 - prod(1 - p_e)` over those communities.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::seed;
use crate::structure::CommunityStructure;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StateFile", into = "StateFile")]
pub struct InfectionState {
    pub community_status: Vec<bool>,
    pub member_status: Vec<bool>,
}

/// On-disk form: `{"X": [0/1...], "U": [0/1...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    #[serde(rename = "X")]
    pub x: Vec<u8>,
    #[serde(rename = "U")]
    pub u: Vec<u8>,
}

fn bits(v: &[u8], what: &str) -> Result<Vec<bool>> {
    v.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::InvalidParameter(format!("{what} entry {other} is not 0/1"))),
        })
        .collect()
}

impl TryFrom<StateFile> for InfectionState {
    type Error = Error;

    fn try_from(f: StateFile) -> Result<Self> {
        Ok(Self {
            community_status: bits(&f.x, "X")?,
            member_status: bits(&f.u, "U")?,
        })
    }
}

impl From<InfectionState> for StateFile {
    fn from(s: InfectionState) -> Self {
        StateFile {
            x: s.community_status.iter().map(|&b| b as u8).collect(),
            u: s.member_status.iter().map(|&b| b as u8).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfectedCounts {
    pub k: usize,
    pub k_f: usize,
    /// Infected members inside each community.
    pub per_community: Vec<usize>,
}

impl InfectionState {
    pub fn healthy(s: &CommunityStructure) -> Self {
        Self {
            community_status: vec![false; s.num_communities()],
            member_status: vec![false; s.n()],
        }
    }

    pub fn infected_members(&self) -> Vec<usize> {
        self.member_status
            .iter()
            .enumerate()
            .filter_map(|(v, &u)| u.then_some(v))
            .collect()
    }

    pub fn num_infected(&self) -> usize {
        self.member_status.iter().filter(|&&u| u).count()
    }

    /// Checks dimensions and that every infected member has an infected community.
    pub fn check_consistent(&self, s: &CommunityStructure) -> Result<()> {
        if self.community_status.len() != s.num_communities() || self.member_status.len() != s.n() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} communities / {} members, structure has {} / {}",
                self.community_status.len(),
                self.member_status.len(),
                s.num_communities(),
                s.n()
            )));
        }
        for (v, &u) in self.member_status.iter().enumerate() {
            if u && !s.communities_of(v).iter().any(|&e| self.community_status[e]) {
                return Err(Error::InvalidParameter(format!(
                    "member {v} is infected but none of its communities is"
                )));
            }
        }
        Ok(())
    }

    pub fn infected_counts(&self, s: &CommunityStructure) -> InfectedCounts {
        let per_community = s
            .communities()
            .iter()
            .map(|c| c.iter().filter(|&&v| self.member_status[v]).count())
            .collect();
        InfectedCounts {
            k: self.num_infected(),
            k_f: self.community_status.iter().filter(|&&x| x).count(),
            per_community,
        }
    }
}

/// How many members each infected community infects under model I.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembersPerCommunity {
    Count(usize),
    /// Fraction of the community's size, rounded to nearest, at least 1.
    Fraction(f64),
}

impl MembersPerCommunity {
    fn resolve(self, size: usize) -> usize {
        match self {
            MembersPerCommunity::Count(k) => k,
            MembersPerCommunity::Fraction(f) => ((f * size as f64).round() as usize).max(1),
        }
    }
}

/// Model I: `k_f` uniformly chosen communities, each infecting a uniform
/// `k_m`-subset of its members; shared members are infected if any
/// community selects them.
pub fn sample_combinatorial(
    s: &CommunityStructure,
    k_f: usize,
    k_m: MembersPerCommunity,
    seed: u64,
) -> Result<InfectionState> {
    let f = s.num_communities();
    if k_f > f {
        return Err(Error::InvalidParameter(format!("k_f = {k_f} exceeds F = {f}")));
    }
    if let MembersPerCommunity::Fraction(x) = k_m {
        check_probability("k_m fraction", x)?;
    }
    let mut rng = seed::rng(seed);
    let mut state = InfectionState::healthy(s);
    let mut chosen = index::sample(&mut rng, f, k_f).into_vec();
    chosen.sort_unstable();
    for e in chosen {
        let members = s.community(e);
        let km = k_m.resolve(members.len());
        if km > members.len() {
            return Err(Error::InvalidParameter(format!(
                "k_m = {km} exceeds size {} of community {e}",
                members.len()
            )));
        }
        state.community_status[e] = true;
        for i in index::sample(&mut rng, members.len(), km) {
            state.member_status[members[i]] = true;
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionParamsII {
    pub q: f64,
    /// Per-community member infection rate `p_e`.
    pub p: Vec<f64>,
}

impl InfectionParamsII {
    pub fn new(q: f64, p: Vec<f64>) -> Result<Self> {
        check_probability("q", q)?;
        for &pe in &p {
            check_probability("p_e", pe)?;
        }
        Ok(Self { q, p })
    }

    pub fn uniform(q: f64, p: f64, num_communities: usize) -> Result<Self> {
        Self::new(q, vec![p; num_communities])
    }

    /// `p_e` drawn uniformly from `[lo, hi]` per community.
    pub fn random_rates(q: f64, lo: f64, hi: f64, num_communities: usize, seed: u64) -> Result<Self> {
        check_probability("rate lower bound", lo)?;
        check_probability("rate upper bound", hi)?;
        if lo > hi {
            return Err(Error::InvalidParameter(format!("rate range [{lo}, {hi}] is empty")));
        }
        let mut rng = seed::rng(seed);
        let p = (0..num_communities)
            .map(|_| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect();
        Self::new(q, p)
    }

    pub fn check_against(&self, s: &CommunityStructure) -> Result<()> {
        if self.p.len() != s.num_communities() {
            return Err(Error::DimensionMismatch(format!(
                "{} community rates for {} communities",
                self.p.len(),
                s.num_communities()
            )));
        }
        Ok(())
    }

    /// Probability that member `v` is infected, averaged over community statuses.
    pub fn marginal_infection_prob(&self, s: &CommunityStructure, v: usize) -> f64 {
        1.0 - s
            .communities_of(v)
            .iter()
            .map(|&e| 1.0 - self.q * self.p[e])
            .product::<f64>()
    }

    /// Population-average member infection probability.
    pub fn mean_infection_prob(&self, s: &CommunityStructure) -> f64 {
        if s.n() == 0 {
            return 0.0;
        }
        (0..s.n())
            .map(|v| self.marginal_infection_prob(s, v))
            .sum::<f64>()
            / s.n() as f64
    }
}

/// `1 - prod(1 - p_e)` over the rates of a member's infected communities.
pub fn member_infection_prob(rates: &[f64]) -> Result<f64> {
    for &r in rates {
        check_probability("p_e", r)?;
    }
    Ok(1.0 - rates.iter().map(|r| 1.0 - r).product::<f64>())
}

/// Model II sample.
pub fn sample_probabilistic(
    s: &CommunityStructure,
    params: &InfectionParamsII,
    seed: u64,
) -> Result<InfectionState> {
    params.check_against(s)?;
    let mut rng = seed::rng(seed);
    let community_status: Vec<bool> = (0..s.num_communities())
        .map(|_| rng.gen_bool(params.q))
        .collect();
    let member_status = (0..s.n())
        .map(|v| {
            let escape: f64 = s
                .communities_of(v)
                .iter()
                .filter(|&&e| community_status[e])
                .map(|&e| 1.0 - params.p[e])
                .product();
            // one draw per member keeps streams aligned across parameter changes
            let u: f64 = rng.gen();
            u < 1.0 - escape
        })
        .collect();
    Ok(InfectionState {
        community_status,
        member_status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::pairwise_overlap_structure;

    fn disjoint(f: usize, m: usize) -> CommunityStructure {
        pairwise_overlap_structure(f, 0, m, 0).unwrap()
    }

    #[test]
    fn member_infection_prob_examples() {
        assert_eq!(member_infection_prob(&[0.5, 0.5]).unwrap(), 0.75);
        assert_eq!(member_infection_prob(&[]).unwrap(), 0.0);
        assert!((member_infection_prob(&[0.3, 0.9]).unwrap() - 0.93).abs() < 1e-12);
        assert!(member_infection_prob(&[1.2]).is_err());
    }

    #[test]
    fn combinatorial_edge_cases() {
        let s = disjoint(5, 4);
        let st = sample_combinatorial(&s, 0, MembersPerCommunity::Count(2), 1).unwrap();
        assert_eq!(st.num_infected(), 0);
        let st = sample_combinatorial(&s, 5, MembersPerCommunity::Count(3), 1).unwrap();
        assert_eq!(st.num_infected(), 15);
        assert!(sample_combinatorial(&s, 6, MembersPerCommunity::Count(1), 1).is_err());
        assert!(sample_combinatorial(&s, 1, MembersPerCommunity::Count(5), 1).is_err());
        let st = sample_combinatorial(&s, 2, MembersPerCommunity::Fraction(0.01), 3).unwrap();
        assert_eq!(st.num_infected(), 2);
    }

    #[test]
    fn probabilistic_edge_cases() {
        let s = pairwise_overlap_structure(6, 2, 3, 1).unwrap();
        let none = sample_probabilistic(&s, &InfectionParamsII::uniform(0.0, 0.7, 6).unwrap(), 9).unwrap();
        assert_eq!(none.num_infected(), 0);
        let all = sample_probabilistic(&s, &InfectionParamsII::uniform(1.0, 1.0, 6).unwrap(), 9).unwrap();
        assert_eq!(all.num_infected(), s.n());
        assert!(InfectionParamsII::uniform(1.5, 0.1, 6).is_err());
        assert!(sample_probabilistic(&s, &InfectionParamsII::uniform(0.5, 0.5, 5).unwrap(), 1).is_err());
    }

    #[test]
    fn counts_match_recount() {
        let s = pairwise_overlap_structure(10, 3, 6, 2).unwrap();
        let params = InfectionParamsII::uniform(0.4, 0.5, 10).unwrap();
        for seed in 0..50 {
            let st = sample_probabilistic(&s, &params, seed).unwrap();
            st.check_consistent(&s).unwrap();
            let c = st.infected_counts(&s);
            let mut per = vec![0; 10];
            let mut k = 0;
            for v in 0..s.n() {
                if st.member_status[v] {
                    k += 1;
                    for (e, members) in s.communities().iter().enumerate() {
                        if members.contains(&v) {
                            per[e] += 1;
                        }
                    }
                }
            }
            assert_eq!(c.k, k);
            assert_eq!(c.per_community, per);
        }
    }

    #[test]
    fn counts_examples() {
        let s = disjoint(3, 2);
        let mut st = InfectionState::healthy(&s);
        assert_eq!(
            st.infected_counts(&s),
            InfectedCounts { k: 0, k_f: 0, per_community: vec![0, 0, 0] }
        );
        st.community_status[1] = true;
        st.member_status[3] = true;
        assert_eq!(
            st.infected_counts(&s),
            InfectedCounts { k: 1, k_f: 1, per_community: vec![0, 1, 0] }
        );
    }

    #[test]
    fn state_json_round_trip() {
        let st = InfectionState {
            community_status: vec![true, false],
            member_status: vec![false, true, false],
        };
        let json = serde_json::to_string(&st).unwrap();
        assert_eq!(json, r#"{"X":[1,0],"U":[0,1,0]}"#);
        assert_eq!(serde_json::from_str::<InfectionState>(&json).unwrap(), st);
        assert!(serde_json::from_str::<InfectionState>(r#"{"X":[2],"U":[]}"#).is_err());
    }

    #[test]
    fn mean_infection_prob_is_exact_average() {
        let s = pairwise_overlap_structure(4, 1, 3, 1).unwrap();
        let params = InfectionParamsII::uniform(0.5, 0.5, 4).unwrap();
        // 10 degree-one members at 0.25, one overlap member at 1 - 0.75^2
        let expect = (10.0 * 0.25 + (1.0 - 0.5625)) / 11.0;
        assert!((params.mean_infection_prob(&s) - expect).abs() < 1e-12);
    }
}
