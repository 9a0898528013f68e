//! Non-adaptive designs and decoders.
//!
//! The two-stage community design stacks `G1`, which pools whole outer sets
//! to rule out uninfected regions, over `G2`, which places each member in
//! exactly one test of at most `c` members with no two members of the same
//! outer set together.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::seed;
use crate::structure::CommunityStructure;
use crate::testing::{TestDesign, TestOutcomes};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum G1Mode {
    /// One test per outer set.
    OnePerOuter,
    /// `rows` tests, each pooling every outer set independently with
    /// probability `inclusion`.
    Grouped { rows: usize, inclusion: f64, seed: u64 },
}

pub fn build_g1(s: &CommunityStructure, mode: G1Mode) -> Result<TestDesign> {
    let outer = s.outer_sets();
    match mode {
        G1Mode::OnePerOuter => TestDesign::new(s.n(), outer.into_iter().map(|d| d.member_ids).collect()),
        G1Mode::Grouped { rows, inclusion, seed } => {
            if rows == 0 {
                return Err(Error::InvalidParameter("G1 needs at least one row".into()));
            }
            check_probability("inclusion", inclusion)?;
            let mut rng = seed::rng(seed);
            let pools = (0..rows)
                .map(|_| {
                    outer
                        .iter()
                        .filter(|_| rng.gen_bool(inclusion))
                        .flat_map(|d| d.member_ids.iter().copied())
                        .collect()
                })
                .collect();
            TestDesign::new(s.n(), pools)
        }
    }
}

/// Greedy `G2` for an arbitrary structure.
///
/// Inner sets are cut into chunks of at most `c` members that stay in one
/// test, placed first-fit. Outer sets, largest first, then spread one member
/// per test over the least-loaded tests, opening new tests when needed.
pub fn build_g2_general(s: &CommunityStructure, c: usize) -> Result<TestDesign> {
    if c == 0 {
        return Err(Error::InvalidParameter("c must be >= 1".into()));
    }
    let partition = s.partition();
    let mut rows: Vec<Vec<usize>> = Vec::new();

    let mut chunks: Vec<&[usize]> = partition
        .iter()
        .flat_map(|cp| cp.inner_sets())
        .flat_map(|d| d.member_ids.chunks(c))
        .collect();
    chunks.sort_by_key(|ch| std::cmp::Reverse(ch.len()));
    for ch in chunks {
        match rows.iter_mut().find(|r| r.len() + ch.len() <= c) {
            Some(r) => r.extend_from_slice(ch),
            None => rows.push(ch.to_vec()),
        }
    }

    let mut outer: Vec<&[usize]> = partition
        .iter()
        .flat_map(|cp| cp.outer_sets())
        .map(|d| d.member_ids.as_slice())
        .collect();
    outer.sort_by_key(|d| std::cmp::Reverse(d.len()));
    let largest = outer.first().map_or(0, |d| d.len());
    let target = s.n().div_ceil(c).max(largest);
    while rows.len() < target {
        rows.push(Vec::new());
    }
    let mut order: Vec<usize> = Vec::with_capacity(rows.len());
    for d in outer {
        order.clear();
        order.extend((0..rows.len()).filter(|&r| rows[r].len() < c));
        order.sort_by_key(|&r| (rows[r].len(), r));
        while order.len() < d.len() {
            rows.push(Vec::new());
            order.push(rows.len() - 1);
        }
        for (&v, &r) in d.iter().zip(&order) {
            rows[r].push(v);
        }
    }
    TestDesign::new(s.n(), rows)
}

/// Block `G2` for the pairwise-overlap layout of
/// [`pairwise_overlap_structure`](crate::structure::pairwise_overlap_structure):
/// `b1 = (F - 2 F_o)/c` block-rows of `c` identity blocks of size `M`, then
/// `b2 = F_o/c` block-rows of `c` identity blocks of size `2M - M_o`.
pub fn build_g2_example(f: usize, f_o: usize, m: usize, m_o: usize, c: usize) -> Result<TestDesign> {
    check_pairwise(f, f_o, m, m_o, c)?;
    let single = f - 2 * f_o;
    if !single.is_multiple_of(c) || !f_o.is_multiple_of(c) {
        return Err(Error::Infeasible(format!(
            "c = {c} must divide both F - 2F_o = {single} and F_o = {f_o}"
        )));
    }
    let pair = 2 * m - m_o;
    let n = single * m + f_o * pair;
    let mut rows = Vec::new();
    for block in 0..single / c {
        for i in 0..m {
            rows.push((0..c).map(|j| (block * c + j) * m + i).collect());
        }
    }
    let base = single * m;
    for block in 0..f_o / c {
        for i in 0..pair {
            rows.push((0..c).map(|j| base + (block * c + j) * pair + i).collect());
        }
    }
    TestDesign::new(n, rows)
}

/// Variant of [`build_g2_example`] for any `c` dividing both the number of
/// degree-one members and the number of shared members. Degree-one members
/// are laid out community by community and shared members pair by pair;
/// test `r` of each group takes positions `r, r + R, r + 2R, ...` with `R`
/// the group size over `c`. Every test then holds exactly `c` members from
/// distinct communities (or distinct pairs), and never mixes degree-one and
/// shared members.
pub fn build_g2_pairwise_strided(f: usize, f_o: usize, m: usize, m_o: usize, c: usize) -> Result<TestDesign> {
    check_pairwise(f, f_o, m, m_o, c)?;
    let single = f - 2 * f_o;
    let pair = 2 * m - m_o;
    let n = single * m + f_o * pair;
    let mut exclusive = Vec::new();
    let mut shared = Vec::new();
    exclusive.extend(0..single * m);
    let base = single * m;
    for p in 0..f_o {
        let start = base + p * pair;
        exclusive.extend(start..start + m - m_o);
        exclusive.extend(start + m..start + pair);
        shared.extend(start + m - m_o..start + m);
    }
    let exclusive_block = if single > 0 { m } else { m - m_o };
    let mut rows = Vec::new();
    for (group, block, what) in [
        (&exclusive, exclusive_block, "degree-one"),
        (&shared, m_o, "shared"),
    ] {
        if group.len() % c != 0 {
            return Err(Error::Infeasible(format!(
                "c = {c} does not divide the {} {what} members",
                group.len()
            )));
        }
        let r_count = group.len() / c;
        if r_count > 0 && r_count < block {
            return Err(Error::Infeasible(format!(
                "c = {c} too large to keep {what} members of one community apart"
            )));
        }
        for r in 0..r_count {
            rows.push((0..c).map(|j| group[r + j * r_count]).collect());
        }
    }
    TestDesign::new(n, rows)
}

fn check_pairwise(f: usize, f_o: usize, m: usize, m_o: usize, c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::InvalidParameter("c must be >= 1".into()));
    }
    if 2 * f_o > f || m == 0 || m_o >= m {
        return Err(Error::Infeasible(format!(
            "invalid pairwise layout F = {f}, F_o = {f_o}, M = {m}, M_o = {m_o}"
        )));
    }
    Ok(())
}

/// Constant-column-weight design: every member joins `w` distinct tests
/// chosen uniformly.
pub fn build_ccw(n: usize, t: usize, w: usize, seed: u64) -> Result<TestDesign> {
    if w == 0 || w > t {
        return Err(Error::InvalidParameter(format!("column weight {w} not in [1, {t}]")));
    }
    let mut rng = seed::rng(seed);
    let mut pools = vec![Vec::new(); t];
    for v in 0..n {
        for r in index::sample(&mut rng, t, w) {
            pools[r].push(v);
        }
    }
    TestDesign::new(n, pools)
}

/// Column weight `round(alpha * T / k)`, clamped to `[1, T]`.
pub fn ccw_weight(alpha: f64, t: usize, k: f64) -> usize {
    ((alpha * t as f64 / k.max(1e-12)).round() as usize).clamp(1, t.max(1))
}

/// Each entry is 1 independently with probability `prob`.
pub fn build_bernoulli(n: usize, t: usize, prob: f64, seed: u64) -> Result<TestDesign> {
    check_probability("inclusion probability", prob)?;
    let mut rng = seed::rng(seed);
    let pools = (0..t)
        .map(|_| (0..n).filter(|_| rng.gen_bool(prob)).collect())
        .collect();
    TestDesign::new(n, pools)
}

fn check_outcomes(d: &TestDesign, y: &TestOutcomes) -> Result<()> {
    if d.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} tests but {} outcomes",
            d.rows(),
            y.len()
        )));
    }
    Ok(())
}

/// COMP: a member is clear iff it is in at least one negative test.
pub fn comp_decode(d: &TestDesign, y: &TestOutcomes) -> Result<Vec<bool>> {
    check_outcomes(d, y)?;
    let mut est = vec![true; d.cols()];
    for (pool, &yr) in d.pools().iter().zip(&y.y) {
        if !yr {
            for &v in pool {
                est[v] = false;
            }
        }
    }
    Ok(est)
}

/// How `G1` outcomes clear members before COMP runs on `G2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingRule {
    /// Clear the members of every negative `G1` test; keeps COMP's
    /// no-false-negative guarantee in noiseless runs.
    NegativeTests,
    /// Decode outer sets first: one is negative if a negative `G1` test
    /// holds any of its members. A community is flagged if some positive
    /// outer set carries it, or if no outer set does. Members of negative
    /// outer sets and members without a flagged community are cleared. Can
    /// miss infections in communities whose outer sets happen to be clean.
    #[default]
    Communities,
}

/// Two-stage community decoding: `G1` clears members, then COMP on `G2`
/// decides the remaining ones.
pub fn community_comp_decode(
    g1: &TestDesign,
    g2: &TestDesign,
    y1: &TestOutcomes,
    y2: &TestOutcomes,
    s: &CommunityStructure,
    rule: ClearingRule,
) -> Result<Vec<bool>> {
    check_outcomes(g1, y1)?;
    if g1.cols() != s.n() || g2.cols() != s.n() {
        return Err(Error::DimensionMismatch("designs and structure disagree on n".into()));
    }
    let comp = comp_decode(g2, y2)?;
    match rule {
        ClearingRule::NegativeTests => {
            let mut est = comp;
            for (pool, &yr) in g1.pools().iter().zip(&y1.y) {
                if !yr {
                    for &v in pool {
                        est[v] = false;
                    }
                }
            }
            Ok(est)
        }
        ClearingRule::Communities => {
            let mut in_negative = vec![false; s.n()];
            for (pool, &yr) in g1.pools().iter().zip(&y1.y) {
                if !yr {
                    for &v in pool {
                        in_negative[v] = true;
                    }
                }
            }
            // COMP over outer sets, then a community is flagged when a
            // positive outer set carries it or no outer set does
            let mut flagged = vec![true; s.num_communities()];
            let outer = s.outer_sets();
            for d in &outer {
                for &e in &d.signature {
                    flagged[e] = false;
                }
            }
            let mut cleared = in_negative.clone();
            for d in &outer {
                if d.member_ids.iter().any(|&v| in_negative[v]) {
                    for &v in &d.member_ids {
                        cleared[v] = true;
                    }
                } else {
                    for &e in &d.signature {
                        flagged[e] = true;
                    }
                }
            }
            let mut est = community_comp_decode_with_status(&flagged, g2, y2, s)?;
            for (u, &c) in est.iter_mut().zip(&cleared) {
                *u &= !c;
            }
            Ok(est)
        }
    }
}

/// COMP on `G2` for members with at least one positive community; every
/// other member is clear.
pub fn community_comp_decode_with_status(
    community_positive: &[bool],
    g2: &TestDesign,
    y2: &TestOutcomes,
    s: &CommunityStructure,
) -> Result<Vec<bool>> {
    if community_positive.len() != s.num_communities() {
        return Err(Error::DimensionMismatch(format!(
            "{} community statuses for {} communities",
            community_positive.len(),
            s.num_communities()
        )));
    }
    let mut est = comp_decode(g2, y2)?;
    for (v, u) in est.iter_mut().enumerate() {
        if !s.communities_of(v).iter().any(|&e| community_positive[e]) {
            *u = false;
        }
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::pairwise_overlap_structure;

    fn outcomes(y: &[u8]) -> TestOutcomes {
        TestOutcomes {
            z: 0.0,
            y: y.iter().map(|&b| b == 1).collect(),
        }
    }

    #[test]
    fn comp_examples() {
        let d = TestDesign::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert_eq!(comp_decode(&d, &outcomes(&[1, 0])).unwrap(), vec![true, false, false]);
        assert_eq!(comp_decode(&d, &outcomes(&[0, 0])).unwrap(), vec![false; 3]);
        assert!(comp_decode(&d, &outcomes(&[0])).is_err());
        let sparse = TestDesign::new(2, vec![vec![0]]).unwrap();
        assert_eq!(comp_decode(&sparse, &outcomes(&[0])).unwrap(), vec![false, true]);
    }

    #[test]
    fn g1_examples() {
        let s = pairwise_overlap_structure(4, 0, 3, 0).unwrap();
        let g1 = build_g1(&s, G1Mode::OnePerOuter).unwrap();
        assert_eq!(g1.rows(), 4);
        assert_eq!(g1.pool(2), s.community(2));
        let g = build_g1(&s, G1Mode::Grouped { rows: 2, inclusion: 1.0, seed: 0 }).unwrap();
        assert_eq!(g.rows(), 2);
        assert_eq!(g.pool(0).len(), 12);
        assert!(build_g1(&s, G1Mode::Grouped { rows: 0, inclusion: 0.5, seed: 0 }).is_err());
    }

    #[test]
    fn g2_example_identity() {
        let d = build_g2_example(6, 2, 3, 1, 2).unwrap();
        assert_eq!(d.rows(), 8);
        assert_eq!(d.cols(), 16);
        assert!(d.column_weights().iter().all(|&w| w == 1));
        assert!(d.pools().iter().all(|p| p.len() == 2));
        assert!(build_g2_example(6, 2, 3, 1, 4).is_err());
        let pure = build_g2_example(4, 0, 3, 0, 2).unwrap();
        assert_eq!(pure.pool(0), &[0, 3]);
    }

    #[test]
    fn g2_general_small_cases() {
        let s = pairwise_overlap_structure(2, 0, 4, 0).unwrap();
        let d = build_g2_general(&s, 2).unwrap();
        assert_eq!(d.rows(), 4);
        for (i, p) in d.pools().iter().enumerate() {
            assert_eq!(p, &vec![i, 4 + i]);
        }
        let ind = build_g2_general(&s, 1).unwrap();
        assert_eq!(ind.rows(), 8);
    }

    #[test]
    fn ccw_and_bernoulli_extremes() {
        let d = build_ccw(5, 3, 3, 1).unwrap();
        assert!(d.pools().iter().all(|p| p.len() == 5));
        let d = build_ccw(5, 3, 1, 1).unwrap();
        assert_eq!(d.pools().iter().map(Vec::len).sum::<usize>(), 5);
        assert!(build_ccw(5, 3, 4, 1).is_err());
        assert!(build_bernoulli(4, 3, 0.0, 1).unwrap().pools().iter().all(Vec::is_empty));
        assert!(build_bernoulli(4, 3, 1.0, 1).unwrap().pools().iter().all(|p| p.len() == 4));
    }

    #[test]
    fn community_decoding_examples() {
        let s = pairwise_overlap_structure(2, 0, 2, 0).unwrap();
        let g1 = build_g1(&s, G1Mode::OnePerOuter).unwrap();
        let g2 = TestDesign::new(4, vec![vec![0], vec![1], vec![2], vec![3]]).unwrap();
        for rule in [ClearingRule::NegativeTests, ClearingRule::Communities] {
            let est = community_comp_decode(&g1, &g2, &outcomes(&[0, 0]), &outcomes(&[1, 1, 1, 1]), &s, rule)
                .unwrap();
            assert_eq!(est, vec![false; 4]);
            let est = community_comp_decode(&g1, &g2, &outcomes(&[0, 1]), &outcomes(&[1, 1, 1, 1]), &s, rule)
                .unwrap();
            assert_eq!(est, vec![false, false, true, true]);
        }
    }
}
