mod common;

use arrival_core::corpus::small_corpus;
use arrival_core::expand::{explore, DEFAULT_BUDGET};
use arrival_core::play::{run_play, Outcome, Strategies};
use arrival_core::rational::ratio;
use arrival_core::reductions::{dualize_players, player_to_random, random_to_player};
use arrival_core::solve::{decide, solve_game, value, Problem};
use arrival_core::{valid_successors, ArrivalInstance, NodeKind};
use common::{arb_instance, kinds};
use num_traits::Zero;
use proptest::prelude::*;

fn max_wins(g: &ArrivalInstance) -> bool {
    value(g).unwrap() == ratio(1, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_to_player_captures_qual0(g in arb_instance(kinds(true, true, true, false))) {
        let positive = !value(&g).unwrap().is_zero();
        prop_assert_eq!(positive, max_wins(&random_to_player(&g)));
        prop_assert_eq!(positive, decide(&g, &Problem::Qual0).unwrap());
    }

    #[test]
    fn player_to_random_captures_wins(g in arb_instance(kinds(false, true, true, false))) {
        let r = player_to_random(&g).unwrap();
        prop_assert_eq!(max_wins(&g), !value(&r).unwrap().is_zero());
    }

    #[test]
    fn round_trip_keeps_qual0(g in arb_instance(kinds(true, true, true, false))) {
        let back = random_to_player(&player_to_random(&g).unwrap());
        prop_assert_eq!(
            decide(&g, &Problem::Qual0).unwrap(),
            decide(&back, &Problem::Qual0).unwrap()
        );
    }

    /// A target-reaching play of the random version is a legal play of the
    /// player version, and a winning play under an optimal strategy of the
    /// player version is a positive-probability play of the random one.
    #[test]
    fn winning_traces_replay(g in arb_instance(kinds(true, true, false, false)), seed in any::<u64>()) {
        let p = random_to_player(&g);
        let trace = run_play(&g, &Strategies::default(), seed, 2000).unwrap();
        for w in trace.states.windows(2) {
            prop_assert!(valid_successors(&p, &w[0]).unwrap().contains(&w[1]));
        }
        let game = explore(&p, DEFAULT_BUDGET).unwrap();
        let strategies = solve_game(&p, &game).unwrap().strategies(&p, &game);
        let win = run_play(&p, &strategies, seed, 2000).unwrap();
        if win.outcome == Outcome::ReachedTarget {
            for w in win.states.windows(2) {
                prop_assert!(valid_successors(&g, &w[0]).unwrap().contains(&w[1]));
            }
        }
    }

    #[test]
    fn dual_complements_without_stalling(g in arb_instance(kinds(true, true, true, true))) {
        let rep = dualize_players(&g).unwrap();
        let sum = value(&rep.instance).unwrap() + value(&g).unwrap();
        if rep.stalling {
            prop_assert!(sum <= ratio(1, 1));
        } else {
            prop_assert_eq!(sum, ratio(1, 1));
        }
    }
}

#[test]
fn qualitative_equivalences_on_corpus() {
    for e in small_corpus(2) {
        let g = &e.instance;
        if g.kinds().min {
            continue;
        }
        let rs = if g.kinds().max { player_to_random(g).unwrap() } else { g.clone() };
        let s1 = random_to_player(&rs);
        assert!(!s1.kinds().random && !s1.node_ids().any(|v| g.kind(v) == NodeKind::MinPlayer));
        let q0 = decide(&rs, &Problem::Qual0).unwrap();
        assert_eq!(q0, max_wins(&s1), "{}", e.name);
        assert_eq!(decide(g, &Problem::Qual0).unwrap(), q0, "{}", e.name);
    }
}
