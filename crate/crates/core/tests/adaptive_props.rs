mod common;

use community_gt::adaptive::{
    adaptive_community_test, binary_splitting, binary_splitting_all, nonoverlapping_baseline, RepresentativePolicy,
};
use community_gt::testing::TestOracle;
use proptest::prelude::*;

fn policy_strategy() -> impl Strategy<Value = RepresentativePolicy> {
    prop_oneof![Just(RepresentativePolicy::All), (1usize..4).prop_map(RepresentativePolicy::Sample)]
}

proptest! {
    #[test]
    fn noiseless_runs_recover_exactly(
        s in common::small_structure(40, 8, 3),
        bits in any::<u64>(),
        theta in 0.0f64..=1.0,
        policy in policy_strategy(),
        seed in any::<u64>(),
    ) {
        let state = common::state_from_bits(&s, bits);
        let mut oracle = TestOracle::new(&state, 0.0, seed).unwrap();
        let r = adaptive_community_test(&s, &mut oracle, theta, policy, seed).unwrap();
        prop_assert_eq!(&r.estimates, &state.member_status);
        prop_assert_eq!(r.tests_used, oracle.tests_used());
        prop_assert_eq!(r.stages.total(), r.tests_used);

        let mut oracle = TestOracle::new(&state, 0.0, seed).unwrap();
        prop_assert_eq!(&binary_splitting_all(s.n(), &mut oracle).unwrap().estimates, &state.member_status);
        let mut oracle = TestOracle::new(&state, 0.0, seed).unwrap();
        prop_assert_eq!(&nonoverlapping_baseline(&s, &mut oracle).unwrap().estimates, &state.member_status);
    }

    #[test]
    fn fewer_inner_sets_tested_as_theta_grows(
        s in common::small_structure(40, 8, 4),
        bits in any::<u64>(),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let state = common::state_from_bits(&s, bits);
        let run = |theta| {
            let mut oracle = TestOracle::new(&state, 0.0, 0).unwrap();
            adaptive_community_test(&s, &mut oracle, theta, RepresentativePolicy::All, 0).unwrap()
        };
        let (r_lo, r_hi) = (run(lo), run(hi));
        prop_assert!(r_hi.inner_sets_tested <= r_lo.inner_sets_tested);
        prop_assert_eq!(r_hi.stages.mixed_stage, r_lo.stages.mixed_stage);
    }

    #[test]
    fn binary_splitting_test_count(n in 1usize..200, bits in proptest::collection::vec(any::<bool>(), 200)) {
        let mut member_status = bits;
        member_status.truncate(n);
        let k = member_status.iter().filter(|&&u| u).count();
        let state = community_gt::InfectionState { community_status: vec![], member_status };
        let mut oracle = TestOracle::new(&state, 0.0, 0).unwrap();
        let r = binary_splitting_all(n, &mut oracle).unwrap();
        prop_assert_eq!(&r.estimates, &state.member_status);
        // each positive leaf costs at most one test per tree level, plus the root
        let depth = (n as f64).log2().ceil() as usize;
        prop_assert!(r.tests_used <= 1 + 2 * k * depth.max(1));
        if k == 0 {
            prop_assert_eq!(r.tests_used, 1);
        }
        if k == n {
            prop_assert_eq!(r.tests_used, 2 * n - 1);
        }
    }
}

#[test]
fn duplicates_are_rejected() {
    let state = community_gt::InfectionState {
        community_status: vec![],
        member_status: vec![false; 4],
    };
    let mut oracle = TestOracle::new(&state, 0.0, 0).unwrap();
    assert!(binary_splitting(&[0, 1, 1], &mut oracle).is_err());
}

#[test]
fn noisy_oracle_only_loses_positives() {
    // a Z channel never turns a clean pool positive
    for seed in 0..50 {
        let s = common::bounded_structure(seed, 6, 4);
        let state = common::random_state(&s, seed);
        let mut oracle = TestOracle::new(&state, 0.3, seed).unwrap();
        let r = adaptive_community_test(&s, &mut oracle, 0.5, RepresentativePolicy::All, seed).unwrap();
        for v in 0..s.n() {
            assert!(!r.estimates[v] || state.member_status[v]);
        }
    }
}
