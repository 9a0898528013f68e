mod common;

use common::enumerate_pair;
use community_gt::analysis::{
    error_rate_model2, expected_extra_tests, fn_comparison_f, overlap_conditional_probs, overlap_fn_mixture,
};
use community_gt::nonadaptive::{build_g2_example, build_g2_pairwise_strided};
use community_gt::structure::pairwise_overlap_structure;
use proptest::prelude::*;

#[test]
fn extra_tests_equal_enumeration() {
    for f in 2..=12usize {
        for k_f in 0..=f {
            let (ordered, _, _, total) = enumerate_pair(f, k_f);
            // exact rational identity: ordered / total == k_f (F - k_f) / (F (F - 1))
            assert_eq!(ordered as u128 * (f * (f - 1)) as u128, (k_f * (f - k_f)) as u128 * total as u128);
            for (f_o, m, z) in [(1, 5, 0.0), (f / 2, 7, 0.1), (f / 2, 10, 0.35)] {
                let expect = (1.0 - z) * f_o as f64 * m as f64 * ordered as f64 / total as f64;
                let got = expected_extra_tests(f, f_o, m, k_f, z).unwrap();
                assert!((got - expect).abs() <= 1e-12 * expect.max(1.0), "F={f} k_f={k_f}: {got} vs {expect}");
            }
        }
    }
}

#[test]
fn overlap_probs_equal_enumeration() {
    for f in 2..=12usize {
        for k_f in 1..=f {
            let p = overlap_conditional_probs(f, k_f).unwrap();
            assert!((p.p_one + p.p_both - 1.0).abs() < 1e-12);
            let (_, one, both, _) = enumerate_pair(f, k_f);
            // p_one = one / (one + both), exactly
            let denom = (2 * f - k_f - 1) as u64;
            assert_eq!(one * denom, 2 * (f - k_f) as u64 * (one + both));
            assert_eq!(both * denom, (k_f - 1) as u64 * (one + both));
            assert!((p.p_one - one as f64 / (one + both) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn f_gamma_increasing_and_bounded() {
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 11.0).collect();
    for &u in &grid {
        for &w in &grid {
            let (lo, hi) = (u * w, w.powf(u) / u);
            let mut prev = fn_comparison_f(0.0, u, w).unwrap();
            assert!((prev - lo).abs() < 1e-12);
            for i in 1..=1000 {
                let gamma = i as f64 * 0.05;
                let f = fn_comparison_f(gamma, u, w).unwrap();
                assert!(f > prev, "u={u} w={w} gamma={gamma}");
                assert!(f > lo && f < hi, "u={u} w={w} gamma={gamma}: {f} not in ({lo}, {hi})");
                prev = f;
            }
        }
    }
}

/// Expected FP rate of COMP on a `G2` design when the infected communities
/// are known, by enumerating the statuses of every community that touches
/// each member's test.
fn enumerated_model2_rate(f: usize, f_o: usize, m: usize, m_o: usize, q: f64, p: f64, c: usize) -> f64 {
    let s = pairwise_overlap_structure(f, f_o, m, m_o).unwrap();
    let g2 = build_g2_example(f, f_o, m, m_o, c)
        .or_else(|_| build_g2_pairwise_strided(f, f_o, m, m_o, c))
        .unwrap();
    let mut fp = 0.0;
    for pool in g2.pools() {
        let mut comms: Vec<usize> = pool.iter().flat_map(|&v| s.communities_of(v).iter().copied()).collect();
        comms.sort_unstable();
        comms.dedup();
        let clean = |v: usize, x: u32| -> (bool, f64) {
            let mut any = false;
            let mut escape = 1.0;
            for e in s.communities_of(v) {
                if x >> comms.binary_search(e).unwrap() & 1 == 1 {
                    any = true;
                    escape *= 1.0 - p;
                }
            }
            (any, escape)
        };
        for x in 0u32..1 << comms.len() {
            let k = x.count_ones() as i32;
            let px = q.powi(k) * (1.0 - q).powi(comms.len() as i32 - k);
            for &v in pool {
                let (flagged, v_clean) = clean(v, x);
                if !flagged {
                    continue;
                }
                let mates_clean: f64 = pool.iter().filter(|&&w| w != v).map(|&w| clean(w, x).1).product();
                fp += px * v_clean * (1.0 - mates_clean);
            }
        }
    }
    fp / s.n() as f64
}

#[test]
fn model2_rate_against_design_enumeration() {
    for &(q, p) in &[(0.2, 0.2), (0.5, 0.7), (0.1, 0.9)] {
        for c in [1usize, 2, 4] {
            // without shared members the closed form is exact
            let got = error_rate_model2(8, 0, 4, 0, q, p, c, 32).unwrap();
            let expect = enumerated_model2_rate(8, 0, 4, 0, q, p, c);
            assert!((got - expect).abs() < 1e-12, "q={q} p={p} c={c}: {got} vs {expect}");

            // with shared members the closed form counts a doubly-exposed
            // clean member with (1 - p) instead of (1 - p)^2
            let (f, f_o, m, m_o) = (12, 4, 4, 2);
            let n = (f - 2 * f_o) * m + f_o * (2 * m - m_o);
            let got = error_rate_model2(f, f_o, m, m_o, q, p, c, n).unwrap();
            let expect = enumerated_model2_rate(f, f_o, m, m_o, q, p, c);
            let slack = (f_o * m_o) as f64 * q * q * p * (1.0 - p) / n as f64;
            assert!(got >= expect - 1e-12 && got - expect <= slack + 1e-12, "q={q} p={p} c={c}: {got} vs {expect}");
        }
    }
}

proptest! {
    #[test]
    fn mixture_is_a_probability(q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0, f in 2usize..50, k_raw in 1usize..50) {
        let k_f = k_raw.min(f);
        let v = overlap_fn_mixture(q1, q2, f, k_f).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        prop_assert!(v <= q1 * q2 + 1e-12);
    }
}
