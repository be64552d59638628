mod common;

use arrival_core::expand::{explore, DEFAULT_BUDGET};
use arrival_core::normalize::{
    epsilon, geq_to_strict, is_simple_form, prefix_coin, prune_dead_edges, swap_target_dead, to_simple_form,
    CoinBranch, ShiftVariant,
};
use arrival_core::rational::ratio;
use arrival_core::solve::value;
use arrival_core::ArrivalInstance;
use common::{arb_instance, kinds};
use proptest::prelude::*;

fn small(g: &ArrivalInstance) -> bool {
    explore(g, DEFAULT_BUDGET).map(|e| e.len() <= 5000).unwrap_or(false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simple_form_keeps_the_value(g in arb_instance(kinds(true, true, true, true))) {
        prop_assume!(small(&g));
        let s = to_simple_form(&g).unwrap();
        prop_assert!(is_simple_form(&s));
        prop_assert_eq!(value(&s).unwrap(), value(&g).unwrap());
    }

    #[test]
    fn pruning_keeps_the_value(g in arb_instance(kinds(true, true, true, true))) {
        prop_assume!(small(&g));
        prop_assert_eq!(value(&prune_dead_edges(&g).unwrap()).unwrap(), value(&g).unwrap());
    }

    #[test]
    fn swap_complements(g in arb_instance(kinds(true, true, false, false))) {
        let swapped = swap_target_dead(&g).unwrap();
        prop_assert_eq!(value(&swapped).unwrap() + value(&g).unwrap(), ratio(1, 1));
    }

    #[test]
    fn coin_prefixes_compose(g in arb_instance(kinds(true, true, true, true))) {
        let v = value(&g).unwrap();
        let up = prefix_coin(&g, CoinBranch::ToTarget).unwrap();
        prop_assert_eq!(value(&up).unwrap(), (ratio(1, 1) + &v) / ratio(2, 1));
        let both = prefix_coin(&up, CoinBranch::ToDead).unwrap();
        prop_assert_eq!(value(&both).unwrap(), (ratio(1, 1) + &v) / ratio(4, 1));
    }

    #[test]
    fn strict_shift_adds_epsilon(g in arb_instance(kinds(true, true, true, true)), l in 1u64..=3) {
        let v = value(&g).unwrap();
        let up = geq_to_strict(&g, Some(l), ShiftVariant::Strict).unwrap();
        prop_assert_eq!(value(&up).unwrap() - &v, epsilon(l) * (ratio(1, 1) - &v));
        let down = geq_to_strict(&g, Some(l), ShiftVariant::Dead).unwrap();
        prop_assert_eq!(&v - value(&down).unwrap(), epsilon(l) * &v);
    }
}

#[test]
fn swap_rejects_players() {
    let g = common::seeded_instance(3, 4, kinds(false, false, true, false), true);
    assert!(swap_target_dead(&g).is_err());
}
