mod common;

use community_gt::bounds::{
    combinatorial_bound, counting_bound, log2_binomial, probabilistic_bound, BoundMethod,
    ProbabilisticBoundOptions,
};
use community_gt::structure::pairwise_overlap_structure;
use num_bigint::BigUint;
use proptest::prelude::*;

fn big_binomial(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #[test]
    fn log2_binomial_matches_bigint(n in 0u64..400, k_raw in 0u64..400) {
        let k = k_raw.min(n);
        let exact = big_binomial(n, k);
        let bits = exact.bits();
        // log2 from the top 64 bits plus the shift
        let shift = bits.saturating_sub(64);
        let top = (&exact >> shift).to_u64_digits().first().copied().unwrap_or(0) as f64;
        let expect = if exact == BigUint::from(0u32) { 0.0 } else { top.log2() + shift as f64 };
        let got = log2_binomial(n, k).unwrap();
        prop_assert!((got - expect).abs() <= 1e-9 * expect.max(1.0), "C({n},{k}): {got} vs {expect}");
    }

    #[test]
    fn counting_bound_below_population_size(n in 1usize..2000, k_raw in 0usize..2000) {
        let k = k_raw.min(n);
        let b = counting_bound(n, k).unwrap();
        prop_assert!(b >= 0.0 && b <= n as f64 + 1e-9);
    }
}

#[test]
fn combinatorial_bound_counts_configurations() {
    for seed in 0..150 {
        let s = common::bounded_structure(seed, 6, 4);
        let state = common::random_state(&s, seed ^ 0xabc);
        let count = common::brute_force_configurations(&s, &state);
        let got = combinatorial_bound(&s, &state).unwrap().value;
        assert!((got - (count as f64).log2()).abs() < 1e-9, "seed {seed}: {got} vs {count}");
    }
}

#[test]
fn exact_entropy_matches_full_enumeration() {
    for seed in 0..60 {
        let s = common::bounded_structure(seed, 10, 4);
        let params = common::params_for(&s, 0.05 + (seed % 9) as f64 * 0.1, &[0.3, 0.6, 0.9, 0.45]);
        let report = probabilistic_bound(&s, &params, &ProbabilisticBoundOptions::default()).unwrap();
        assert_eq!(report.method, BoundMethod::Exact);
        let expect = common::brute_force_entropy(&s, &params);
        assert!((report.value - expect).abs() < 1e-9, "seed {seed}: {} vs {expect}", report.value);
    }
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let mut checked = 0;
    for seed in 0..30 {
        let s = common::bounded_structure(seed, 12, 4);
        let params = common::params_for(&s, 0.2, &[0.3, 0.9, 0.5]);
        let exact = probabilistic_bound(&s, &params, &ProbabilisticBoundOptions::default()).unwrap();
        let mc_opts = ProbabilisticBoundOptions {
            exact_max_component: 0,
            mc_samples: 20_000,
            seed,
        };
        let mc = probabilistic_bound(&s, &params, &mc_opts).unwrap();
        for (a, b) in exact.terms.iter().zip(&mc.terms).skip(1) {
            assert!(b.std_error > 0.0 || (a.value - b.value).abs() < 1e-12);
            assert!((a.value - b.value).abs() <= 3.0 * b.std_error + 1e-12, "seed {seed} {}: {} vs {} ± {}", a.label, a.value, b.value, b.std_error);
            checked += 1;
        }
    }
    assert!(checked > 30);
}

#[test]
fn community_bound_beats_counting_bound_on_clustered_infections() {
    let s = pairwise_overlap_structure(20, 5, 10, 2).unwrap();
    let st = community_gt::infection::sample_combinatorial(
        &s,
        2,
        community_gt::infection::MembersPerCommunity::Count(8),
        3,
    )
    .unwrap();
    let comb = combinatorial_bound(&s, &st).unwrap().value;
    assert!(comb < counting_bound(s.n(), st.num_infected()).unwrap());
}
