//! Randomized property suites over seeded instances.

mod common;

use proptest::prelude::*;

fn check(r: common::Check) -> Result<(), TestCaseError> {
    r.map(|_| ()).map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_chain_is_nested(seed in any::<u64>()) {
        check(common::prop_kernel_chain(seed))?;
    }

    #[test]
    fn rank_sequence_decreases(seed in any::<u64>()) {
        check(common::prop_rank_sequence(seed))?;
    }

    #[test]
    fn transformed_candidate_has_zero_block(seed in any::<u64>()) {
        check(common::prop_zero_block(seed))?;
    }

    #[test]
    fn ql_reassembles(seed in any::<u64>()) {
        check(common::prop_ql(seed))?;
    }

    #[test]
    fn variation_of_constants_matches(seed in 0u64..1_000_000) {
        check(common::prop_voc(seed))?;
    }

    #[test]
    fn congruence_preserves_psd(seed in any::<u64>()) {
        check(common::prop_congruence(seed))?;
    }

    #[test]
    fn ac_and_singular_parts_sum_to_q(seed in any::<u64>()) {
        check(common::prop_ac_split(seed))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pointwise_certificate_implies_dissipation(seed in 0u64..1_000_000) {
        let r = common::soundness(seed, 30).map_err(TestCaseError::fail)?;
        prop_assert_ne!(r, Some(false));
    }

    #[test]
    fn kernel_failure_yields_violation(seed in 0u64..1_000_000) {
        check(common::necessity(seed))?;
    }
}
