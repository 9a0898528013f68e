//! Adaptive testing: binary splitting, community-aware testing over the
//! standard partition, and a community baseline that ignores overlaps.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::structure::{is_proper_subset, CommunityStructure, PartitionSet};
use crate::testing::TestOracle;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBreakdown {
    pub mixed_stage: usize,
    pub individual_stage: usize,
    pub residual_group_stage: usize,
}

impl StageBreakdown {
    pub fn total(&self) -> usize {
        self.mixed_stage + self.individual_stage + self.residual_group_stage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveResult {
    pub estimates: Vec<bool>,
    pub tests_used: usize,
    pub stages: StageBreakdown,
    /// Inner partition sets that were tested member by member.
    pub inner_sets_tested: usize,
}

/// Binary splitting over mixed samples: each item is a pool, and testing a
/// group of items is one oracle query on the union of their pools.
///
/// Test the whole group; if positive and larger than one item, split into a
/// left half of `ceil(len/2)` items and a right half and recurse on both.
pub fn binary_splitting_pools<P: AsRef<[usize]>>(
    pools: &[P],
    oracle: &mut TestOracle,
) -> Result<Vec<bool>> {
    let mut out = vec![false; pools.len()];
    if !pools.is_empty() {
        split(pools, 0, pools.len(), oracle, &mut out)?;
    }
    Ok(out)
}

fn split<P: AsRef<[usize]>>(
    pools: &[P],
    lo: usize,
    hi: usize,
    oracle: &mut TestOracle,
    out: &mut [bool],
) -> Result<()> {
    if !oracle.query_mixed(&pools[lo..hi])? {
        return Ok(());
    }
    if hi - lo == 1 {
        out[lo] = true;
        return Ok(());
    }
    let mid = lo + (hi - lo).div_ceil(2);
    split(pools, lo, mid, oracle, out)?;
    split(pools, mid, hi, oracle, out)
}

/// Binary splitting over individual members; statuses are aligned with `items`.
pub fn binary_splitting(items: &[usize], oracle: &mut TestOracle) -> Result<Vec<bool>> {
    let mut seen = items.to_vec();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateMember {
            member: w[0],
            context: "binary splitting input".into(),
        });
    }
    let pools: Vec<[usize; 1]> = items.iter().map(|&v| [v]).collect();
    binary_splitting_pools(&pools, oracle)
}

/// Binary splitting over the whole population.
pub fn binary_splitting_all(n: usize, oracle: &mut TestOracle) -> Result<AdaptiveResult> {
    let items: Vec<usize> = (0..n).collect();
    let estimates = binary_splitting(&items, oracle)?;
    let stages = StageBreakdown {
        residual_group_stage: oracle.tests_used(),
        ..Default::default()
    };
    Ok(AdaptiveResult {
        estimates,
        tests_used: stages.total(),
        stages,
        inner_sets_tested: 0,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentativePolicy {
    /// Pool the entire set.
    #[default]
    All,
    /// Pool a uniform sample of this many members.
    Sample(usize),
}

pub fn select_representatives(
    set: &PartitionSet,
    policy: RepresentativePolicy,
    seed: u64,
) -> Result<Vec<usize>> {
    match policy {
        RepresentativePolicy::All => Ok(set.member_ids.clone()),
        RepresentativePolicy::Sample(m) => {
            let len = set.member_ids.len();
            if m > len {
                return Err(Error::InvalidParameter(format!(
                    "cannot sample {m} representatives from a set of {len}"
                )));
            }
            let mut rng = seed::rng(seed);
            let mut picked: Vec<usize> = index::sample(&mut rng, len, m)
                .into_iter()
                .map(|i| set.member_ids[i])
                .collect();
            picked.sort_unstable();
            Ok(picked)
        }
    }
}

fn test_individually(
    members: &[usize],
    oracle: &mut TestOracle,
    estimates: &mut [bool],
) -> Result<f64> {
    let mut positives = 0;
    for &v in members {
        let u = oracle.query(&[v])?;
        estimates[v] = u;
        positives += u as usize;
    }
    Ok(positives as f64 / members.len() as f64)
}

/// Community-aware adaptive testing.
///
/// 1. Pool representatives of every outer set into mixed samples and find
///    the positive ones by binary splitting over mixed samples.
/// 2. Test members of positive outer sets individually, recording the
///    observed infection rate of each set.
/// 3. Visit inner sets by increasing degree; test one individually if some
///    already-tested set whose signature it strictly contains has an observed
///    rate above `theta`. Sets never tested count as rate 0.
/// 4. Everything else is resolved by binary splitting over members.
pub fn adaptive_community_test(
    s: &CommunityStructure,
    oracle: &mut TestOracle,
    theta: f64,
    policy: RepresentativePolicy,
    seed: u64,
) -> Result<AdaptiveResult> {
    if oracle.n() != s.n() {
        return Err(Error::DimensionMismatch(format!(
            "oracle over {} members, structure over {}",
            oracle.n(),
            s.n()
        )));
    }
    let start = oracle.tests_used();
    let partition = s.partition();

    let mut reps = Vec::new();
    for cp in &partition {
        for d in cp.outer_sets() {
            let policy = match policy {
                RepresentativePolicy::Sample(m) => RepresentativePolicy::Sample(m.min(d.member_ids.len())),
                RepresentativePolicy::All => RepresentativePolicy::All,
            };
            reps.push(select_representatives(d, policy, seed::derive(seed, &[reps.len() as u64]))?);
        }
    }
    let mixed = binary_splitting_pools(&reps, oracle)?;
    let after_mixed = oracle.tests_used();

    let mut estimates = vec![false; s.n()];
    let mut deferred = Vec::new();
    let mut inner_sets_tested = 0;
    let mut outer_idx = 0;
    for cp in &partition {
        let mut rate: Vec<Option<f64>> = vec![None; cp.sets.len()];
        for (i, d) in cp.sets.iter().enumerate().filter(|(_, d)| d.is_outer()) {
            if mixed[outer_idx] {
                rate[i] = Some(test_individually(&d.member_ids, oracle, &mut estimates)?);
            } else {
                deferred.extend_from_slice(&d.member_ids);
            }
            outer_idx += 1;
        }
        // sets are ordered by degree, so every strict-subset signature is already settled
        for (i, b) in cp.sets.iter().enumerate().filter(|(_, b)| !b.is_outer()) {
            let heavy = cp.sets.iter().zip(&rate).any(|(d, r)| {
                r.is_some_and(|r| r > theta) && is_proper_subset(&d.signature, &b.signature)
            });
            if heavy {
                rate[i] = Some(test_individually(&b.member_ids, oracle, &mut estimates)?);
                inner_sets_tested += 1;
            } else {
                deferred.extend_from_slice(&b.member_ids);
            }
        }
    }
    let after_individual = oracle.tests_used();

    let resolved = binary_splitting(&deferred, oracle)?;
    for (&v, &u) in deferred.iter().zip(&resolved) {
        estimates[v] = u;
    }
    let stages = StageBreakdown {
        mixed_stage: after_mixed - start,
        individual_stage: after_individual - after_mixed,
        residual_group_stage: oracle.tests_used() - after_individual,
    };
    Ok(AdaptiveResult {
        estimates,
        tests_used: stages.total(),
        stages,
        inner_sets_tested,
    })
}

/// Community testing that treats communities as if they were disjoint: one
/// pooled test per community, individual tests for members of positive
/// communities, binary splitting for the rest.
pub fn nonoverlapping_baseline(s: &CommunityStructure, oracle: &mut TestOracle) -> Result<AdaptiveResult> {
    if oracle.n() != s.n() {
        return Err(Error::DimensionMismatch(format!(
            "oracle over {} members, structure over {}",
            oracle.n(),
            s.n()
        )));
    }
    let start = oracle.tests_used();
    let mut flagged = vec![false; s.n()];
    for members in s.communities() {
        if oracle.query(members)? {
            for &v in members {
                flagged[v] = true;
            }
        }
    }
    let after_mixed = oracle.tests_used();
    let mut estimates = vec![false; s.n()];
    let mut rest = Vec::new();
    for v in 0..s.n() {
        if flagged[v] {
            estimates[v] = oracle.query(&[v])?;
        } else {
            rest.push(v);
        }
    }
    let after_individual = oracle.tests_used();
    let resolved = binary_splitting(&rest, oracle)?;
    for (&v, &u) in rest.iter().zip(&resolved) {
        estimates[v] = u;
    }
    let stages = StageBreakdown {
        mixed_stage: after_mixed - start,
        individual_stage: after_individual - after_mixed,
        residual_group_stage: oracle.tests_used() - after_individual,
    };
    Ok(AdaptiveResult {
        estimates,
        tests_used: stages.total(),
        stages,
        inner_sets_tested: 0,
    })
}
