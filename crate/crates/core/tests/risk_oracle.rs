mod common;

use std::time::Instant;

use common::{check_against_oracle, check_invariants, random_instance};
use proptest::prelude::*;

#[test]
fn risk_and_differ_match_brute_force_on_50_grids() {
    let start = Instant::now();
    let mut checked = 0;
    for seed in 0..50 {
        let inst = random_instance(seed);
        checked += check_against_oracle(&inst).unwrap_or_else(|e| panic!("instance {seed}: {e}"));
    }
    assert!(checked > 500, "only {checked} values compared");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_agreement_holds_for_arbitrary_seeds(seed in any::<u64>()) {
        let inst = random_instance(seed);
        prop_assert!(check_against_oracle(&inst).is_ok(), "{:?}", check_against_oracle(&inst));
    }

    #[test]
    fn count_and_ratio_survive_crime_scaling(seed in any::<u64>(), k in 1u64..50) {
        let inst = random_instance(seed);
        let res = check_invariants(&inst, k);
        prop_assert!(res.is_ok(), "{:?}", res);
    }
}
