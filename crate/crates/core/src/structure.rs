//! Hypergraph community structures.
//!
//! Members are `0..n`; communities are hyperedges over members. A structure
//! decomposes into connected components, and each component's members are
//! grouped by their exact set of communities (the standard partition). Sets
//! whose community signature is minimal within the component are *outer*;
//! the rest are *inner*.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StructureFile", into = "StructureFile")]
pub struct CommunityStructure {
    n: usize,
    communities: Vec<Vec<usize>>,
    member_index: Vec<Vec<usize>>,
}

/// On-disk form: `{"n": int, "communities": [[int,...],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureFile {
    pub n: usize,
    pub communities: Vec<Vec<usize>>,
}

impl TryFrom<StructureFile> for CommunityStructure {
    type Error = Error;

    fn try_from(file: StructureFile) -> Result<Self> {
        CommunityStructure::new(file.n, file.communities)
    }
}

impl From<CommunityStructure> for StructureFile {
    fn from(s: CommunityStructure) -> Self {
        StructureFile {
            n: s.n,
            communities: s.communities,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub community_ids: Vec<usize>,
    pub member_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Outer,
    Inner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSet {
    pub member_ids: Vec<usize>,
    /// The communities shared by every member of the set.
    pub signature: Vec<usize>,
    pub kind: SetKind,
}

impl PartitionSet {
    pub fn degree(&self) -> usize {
        self.signature.len()
    }

    pub fn is_outer(&self) -> bool {
        self.kind == SetKind::Outer
    }
}

/// A component together with its standard partition.
#[derive(Debug, Clone)]
pub struct ComponentPartition {
    pub component: Component,
    /// Ordered by (degree, signature).
    pub sets: Vec<PartitionSet>,
}

impl ComponentPartition {
    pub fn outer_sets(&self) -> impl Iterator<Item = &PartitionSet> {
        self.sets.iter().filter(|d| d.is_outer())
    }

    pub fn inner_sets(&self) -> impl Iterator<Item = &PartitionSet> {
        self.sets.iter().filter(|d| !d.is_outer())
    }
}

impl CommunityStructure {
    pub fn new(n: usize, communities: Vec<Vec<usize>>) -> Result<Self> {
        let mut member_index = vec![Vec::new(); n];
        let mut sorted = Vec::with_capacity(communities.len());
        for (e, members) in communities.into_iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyCommunity(e));
            }
            let mut members = members;
            members.sort_unstable();
            for w in members.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::DuplicateMember {
                        member: w[0],
                        context: format!("community {e}"),
                    });
                }
            }
            for &v in &members {
                if v >= n {
                    return Err(Error::MemberOutOfRange { id: v, n });
                }
                member_index[v].push(e);
            }
            sorted.push(members);
        }
        if let Some(v) = member_index.iter().position(|s| s.is_empty()) {
            return Err(Error::UnassignedMember(v));
        }
        Ok(Self {
            n,
            communities: sorted,
            member_index,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_communities(&self) -> usize {
        self.communities.len()
    }

    pub fn communities(&self) -> &[Vec<usize>] {
        &self.communities
    }

    pub fn community(&self, e: usize) -> &[usize] {
        &self.communities[e]
    }

    /// Sorted community ids containing member `v`.
    pub fn communities_of(&self, v: usize) -> &[usize] {
        &self.member_index[v]
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.member_index
            .get(v)
            .map(Vec::len)
            .ok_or(Error::MemberOutOfRange { id: v, n: self.n })
    }

    pub fn max_degree(&self) -> usize {
        self.member_index.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_overlaps(&self) -> bool {
        self.max_degree() > 1
    }

    /// Connected components, ordered by their smallest community id.
    pub fn components(&self) -> Vec<Component> {
        let f = self.communities.len();
        let mut dsu = Dsu::new(f);
        for comms in &self.member_index {
            for w in comms.windows(2) {
                dsu.union(w[0], w[1]);
            }
        }
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in 0..f {
            by_root.entry(dsu.find(e)).or_default().push(e);
        }
        let mut comps: Vec<Component> = by_root
            .into_values()
            .map(|community_ids| {
                let mut member_ids: Vec<usize> = community_ids
                    .iter()
                    .flat_map(|&e| self.communities[e].iter().copied())
                    .collect();
                member_ids.sort_unstable();
                member_ids.dedup();
                Component {
                    community_ids,
                    member_ids,
                }
            })
            .collect();
        comps.sort_by_key(|c| c.community_ids[0]);
        comps
    }

    /// The standard partition of one component, with outer/inner labels.
    pub fn standard_partition(&self, c: &Component) -> Vec<PartitionSet> {
        let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
        for &v in &c.member_ids {
            groups.entry(&self.member_index[v]).or_default().push(v);
        }
        let mut sets: Vec<PartitionSet> = groups
            .into_iter()
            .map(|(sig, members)| PartitionSet {
                member_ids: members,
                signature: sig.to_vec(),
                kind: SetKind::Outer,
            })
            .collect();
        sets.sort_by(|a, b| {
            a.signature
                .len()
                .cmp(&b.signature.len())
                .then_with(|| a.signature.cmp(&b.signature))
        });
        let kinds: Vec<SetKind> = sets
            .iter()
            .map(|d| {
                let has_smaller = sets
                    .iter()
                    .any(|b| is_proper_subset(&b.signature, &d.signature));
                if has_smaller {
                    SetKind::Inner
                } else {
                    SetKind::Outer
                }
            })
            .collect();
        for (d, kind) in sets.iter_mut().zip(kinds) {
            d.kind = kind;
        }
        sets
    }

    /// Components and their standard partitions in one pass.
    pub fn partition(&self) -> Vec<ComponentPartition> {
        self.components()
            .into_iter()
            .map(|component| {
                let sets = self.standard_partition(&component);
                ComponentPartition { component, sets }
            })
            .collect()
    }

    /// All outer sets of the structure, in component order.
    pub fn outer_sets(&self) -> Vec<PartitionSet> {
        self.partition()
            .into_iter()
            .flat_map(|cp| cp.sets.into_iter().filter(PartitionSet::is_outer))
            .collect()
    }
}

/// Sorted-slice proper subset test.
pub fn is_proper_subset(small: &[usize], big: &[usize]) -> bool {
    if small.len() >= big.len() {
        return false;
    }
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeDistribution {
    /// Geometric on `{1, 2, ...}` with the given success probability,
    /// truncated to `{1..=max_degree}` and renormalized.
    Geometric { success: f64 },
}

impl Default for DegreeDistribution {
    fn default() -> Self {
        DegreeDistribution::Geometric { success: 0.5 }
    }
}

impl DegreeDistribution {
    pub fn weights(&self, max_degree: usize) -> Vec<f64> {
        match *self {
            DegreeDistribution::Geometric { success } => (0..max_degree)
                .map(|i| success * (1.0 - success).powi(i as i32))
                .collect(),
        }
    }

    pub fn mean(&self, max_degree: usize) -> f64 {
        let w = self.weights(max_degree);
        let total: f64 = w.iter().sum();
        w.iter()
            .enumerate()
            .map(|(i, x)| (i + 1) as f64 * x)
            .sum::<f64>()
            / total
    }

    /// Truncated geometric whose mean is `mean`, found by bisection.
    pub fn geometric_with_mean(mean: f64, max_degree: usize) -> Result<Self> {
        let hi_mean = (max_degree as f64 + 1.0) / 2.0;
        if !(mean >= 1.0 && mean < hi_mean) {
            return Err(Error::InvalidParameter(format!(
                "mean degree {mean} not attainable with max degree {max_degree}"
            )));
        }
        let (mut lo, mut hi) = (1e-9, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            // the mean decreases as the success probability grows
            if (DegreeDistribution::Geometric { success: mid }).mean(max_degree) > mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(DegreeDistribution::Geometric {
            success: 0.5 * (lo + hi),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomStructureParams {
    pub target_communities: usize,
    /// Inclusive community-size range.
    pub size_range: (usize, usize),
    pub max_degree: usize,
    #[serde(default)]
    pub degree_distribution: DegreeDistribution,
    pub seed: u64,
}

impl RandomStructureParams {
    /// Experimental setup with about 200 communities of 15-25 members and
    /// member degrees capped at 4. The geometric parameter is chosen so the
    /// population comes out near 3000 members.
    pub fn evaluation_scale(seed: u64) -> Self {
        Self::scaled(220, 3000, seed)
    }

    /// Same recipe with `target_communities` communities and about `n` members.
    pub fn scaled(target_communities: usize, n: usize, seed: u64) -> Self {
        let mean_size = 20.0;
        let mean_degree = target_communities as f64 * mean_size / n as f64;
        let degree_distribution = DegreeDistribution::geometric_with_mean(mean_degree, 4)
            .unwrap_or_default();
        Self {
            target_communities,
            size_range: (15, 25),
            max_degree: 4,
            degree_distribution,
            seed,
        }
    }
}

const MAX_GENERATION_ATTEMPTS: u64 = 64;

/// Random structure: community sizes first, then member degrees until the
/// slots are covered, then slot filling by uniform draws over the remaining
/// degree budget.
pub fn random_structure(params: &RandomStructureParams) -> Result<CommunityStructure> {
    let (lo, hi) = params.size_range;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "size range [{lo}, {hi}] is empty or contains 0"
        )));
    }
    if params.max_degree == 0 {
        return Err(Error::InvalidParameter("max_degree must be >= 1".into()));
    }
    if params.target_communities == 0 {
        return Err(Error::InvalidParameter(
            "target_communities must be >= 1".into(),
        ));
    }
    let max_degree = params.max_degree.min(params.target_communities);
    let weights = params.degree_distribution.weights(max_degree);
    let degree_dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidParameter(format!("degree distribution: {e}")))?;

    let mut last_err = None;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = seed::child_rng(params.seed, &[attempt]);
        let sizes: Vec<usize> = (0..params.target_communities)
            .map(|_| rng.gen_range(lo..=hi))
            .collect();
        let slots: usize = sizes.iter().sum();
        let mut degrees = Vec::new();
        let mut covered = 0;
        while covered < slots {
            let d = (degree_dist.sample(&mut rng) + 1).min(slots - covered);
            degrees.push(d);
            covered += d;
        }
        let n = degrees.len();
        if sizes.iter().any(|&s| s > n) {
            last_err = Some(Error::Infeasible(format!(
                "a community of size {} exceeds the {} members",
                sizes.iter().max().unwrap(),
                n
            )));
            continue;
        }
        match fill_slots(&sizes, &degrees, &mut rng) {
            Some(communities) => return CommunityStructure::new(n, communities),
            None => {
                last_err = Some(Error::Infeasible(
                    "slot filling failed after bounded retries".into(),
                ))
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Infeasible("generation failed".into())))
}

fn fill_slots(sizes: &[usize], degrees: &[usize], rng: &mut impl Rng) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    let mut communities = Vec::with_capacity(sizes.len());
    let mut in_current = vec![false; degrees.len()];
    for &size in sizes {
        let mut members = Vec::with_capacity(size);
        let mut misses = 0;
        while members.len() < size {
            if stubs.is_empty() {
                return None;
            }
            let i = rng.gen_range(0..stubs.len());
            let v = stubs[i];
            if in_current[v] {
                misses += 1;
                if misses > 50 * size {
                    return None;
                }
                continue;
            }
            stubs.swap_remove(i);
            in_current[v] = true;
            members.push(v);
        }
        for &v in &members {
            in_current[v] = false;
        }
        members.sort_unstable();
        communities.push(members);
    }
    Some(communities)
}

/// `F - 2 F_o` disjoint communities of size `M` followed by `F_o` pairs of
/// communities of size `M` sharing `M_o` members each.
///
/// Member layout: the disjoint communities come first, each contiguous;
/// then each pair as `[first-only (M - M_o), shared (M_o), second-only (M - M_o)]`.
pub fn pairwise_overlap_structure(
    f: usize,
    f_o: usize,
    m: usize,
    m_o: usize,
) -> Result<CommunityStructure> {
    if 2 * f_o > f {
        return Err(Error::Infeasible(format!("2 F_o = {} exceeds F = {f}", 2 * f_o)));
    }
    if m == 0 || m_o >= m {
        return Err(Error::Infeasible(format!(
            "need 0 <= M_o < M, got M = {m}, M_o = {m_o}"
        )));
    }
    let mut communities = Vec::with_capacity(f);
    let mut next = 0;
    for _ in 0..f - 2 * f_o {
        communities.push((next..next + m).collect::<Vec<_>>());
        next += m;
    }
    let excl = m - m_o;
    for _ in 0..f_o {
        let first: Vec<usize> = (next..next + m).collect();
        let second: Vec<usize> = (next + excl..next + excl + m).collect();
        communities.push(first);
        communities.push(second);
        next += 2 * m - m_o;
    }
    CommunityStructure::new(next, communities)
}
