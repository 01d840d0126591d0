mod common;

use proptest::prelude::*;

use capkit_core::domains::{bundled_world, Bundled};
use capkit_core::harvest::{dedup_consecutive, generate_tasks};
use capkit_core::io::{export_model, parse_model};
use capkit_core::model::{Mode, ModeSet};
use capkit_core::{abstract_state, parse_domain, parse_instance, Action};

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn domain_documents_round_trip(d in common::domain()) {
        let text = d.to_string();
        let back = parse_domain(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn instance_documents_round_trip((d, i) in common::domain_and_instance()) {
        let back = parse_instance(&i.to_string(), &d).unwrap();
        prop_assert_eq!(back, i);
    }

    #[test]
    fn truncated_documents_never_panic((d, i) in common::domain_and_instance(), cut in 0usize..400) {
        let dt = d.to_string();
        let it = i.to_string();
        let _ = parse_domain(&dt[..cut.min(dt.len())]);
        let _ = parse_instance(&it[..cut.min(it.len())], &d);
    }

    #[test]
    fn mode_set_algebra(a in 0u8..8, b in 0u8..8) {
        let all = [Mode::Pos, Mode::Neg, Mode::Absent];
        let set = |bits: u8| ModeSet::of(&all.iter().enumerate().filter(|(i, _)| bits & (1 << i) != 0).map(|(_, m)| *m).collect::<Vec<_>>());
        let (x, y) = (set(a), set(b));
        prop_assert_eq!(x.intersect(y).len(), all.iter().filter(|m| x.contains(**m) && y.contains(**m)).count());
        prop_assert_eq!(x.union(y).len(), all.iter().filter(|m| x.contains(**m) || y.contains(**m)).count());
        prop_assert_eq!(x.is_resolved(), x.len() == 1);
    }

    #[test]
    fn dedup_leaves_no_repeats(xs in prop::collection::vec(0usize..3, 0..30)) {
        let world = bundled_world("zelda3", 0).unwrap();
        let mut s = world.initial.clone();
        let mut states = Vec::new();
        for x in xs {
            let a = world.actions().nth(x).unwrap();
            s = world.step(&s, a);
            states.push(abstract_state(&world, &s));
        }
        let d = dedup_consecutive(states.clone());
        prop_assert!(d.windows(2).all(|w| w[0] != w[1]));
        let mut expect = states;
        expect.dedup();
        prop_assert_eq!(d, expect);
    }

    #[test]
    fn task_lists_are_prefix_stable(seed in 0u64..50, n in 1usize..6) {
        let world = bundled_world("zelda4", 0).unwrap();
        let short = generate_tasks(&world, n, seed).unwrap();
        let long = generate_tasks(&world, n + 3, seed).unwrap();
        prop_assert_eq!(&long[..n], &short[..]);
    }

    #[test]
    fn simulator_keeps_agent_inside(seed in 0u64..20, moves in prop::collection::vec(0usize..16, 1..40)) {
        let world = bundled_world("escape5", seed).unwrap();
        let actions: Vec<Action> = world.actions().collect();
        let mut s = world.initial.clone();
        for m in moves {
            s = world.step(&s, actions[m % actions.len()]);
            prop_assert!(s.agent.row < world.rows && s.agent.col < world.cols);
            prop_assert!(!world.is_wall(s.agent));
            prop_assert!(world.is_valid_state(&s));
        }
    }
}

#[test]
fn gold_models_round_trip() {
    for b in Bundled::ALL {
        let world = bundled_world(&format!("{}5", b.name()), 1).unwrap();
        let u = &world.universe;
        let gold = b.gold(u);
        let text = export_model(u, b.name(), &gold);
        let (name, back) = parse_model(u, &text).unwrap();
        assert_eq!(name, b.name());
        assert_eq!(back, gold);
        assert_eq!(export_model(u, &name, &back), text);
    }
}
