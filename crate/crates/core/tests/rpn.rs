//! Token net engine: conservation, guards, fixpoints, replay and races.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpn_mimo::channel::{generate_channel, normalize_channel, ChannelTensor, SceneConfig};
use rpn_mimo::metrics::FlopLedger;
use rpn_mimo::objective::Objective;
use rpn_mimo::rpn::{
    enabled_transitions, guard_capacities, init_state, race, read_trace, replay_backward, run_seeded, run_to_fixpoint,
    write_trace, GuardScaling, RpnConfig, SelectionState,
};
use rpn_mimo::topology::{build_custom, build_toroid, build_toroid_with, symmetric_neighbourhoods, EdgeRule};

fn scene_channel(n_tx: usize, n_users: usize, seed: u64) -> ChannelTensor {
    let cfg = SceneConfig {
        n_tx,
        n_users,
        n_subcarriers: 4,
        seed,
        ..SceneConfig::default()
    };
    normalize_channel(&generate_channel(&cfg).unwrap()).unwrap()
}

const RHO: f64 = 0.316_227_766_016_837_94;

/// Independent guard: capacity of the neighbourhood's token holders through
/// the reference path, before and after the move.
fn reference_delta(state: &SelectionState<'_>, obj: &Objective<'_>, from: usize, to: usize) -> f64 {
    let t = state.topology();
    let nbhd = t.neighbourhood(from, to).unwrap();
    let before: Vec<usize> = nbhd
        .iter()
        .filter(|&&p| state.has_token(p))
        .map(|&p| t.antenna(p))
        .collect();
    let after: Vec<usize> = nbhd
        .iter()
        .filter(|&&p| (state.has_token(p) && p != from) || p == to)
        .map(|&p| t.antenna(p))
        .collect();
    let n_ts = before.len().max(1);
    obj.capacity_reference(&after, n_ts).unwrap() - obj.capacity_reference(&before, n_ts).unwrap()
}

#[test]
fn init_state_seeds_differ() {
    let t = build_toroid(4, 16).unwrap();
    let one = init_state(&t, 1, 42).unwrap();
    assert_eq!(one, init_state(&t, 1, 42).unwrap());
    let distinct = (0..100u64)
        .filter(|&s| init_state(&t, 16, 2 * s).unwrap() != init_state(&t, 16, 2 * s + 1).unwrap())
        .count();
    assert_eq!(distinct, 100);
}

#[test]
fn candidate_edges_need_exactly_one_token() {
    // A - B, B - G, plus a path through C..F to keep the net connected.
    let (a, b, c, d, e, f, g) = (0, 1, 2, 3, 4, 5, 6);
    let edges = [(a, b), (b, g), (b, c), (c, d), (d, e), (e, f), (f, g)];
    let all = vec![a, b, c, d, e, f, g];
    let nb = symmetric_neighbourhoods(&edges.iter().map(|&e| (e, all.clone())).collect::<Vec<_>>());
    let t = build_custom(7, &edges, nb).unwrap();
    // G is by far the strongest antenna, A and B weak.
    let h = ChannelTensor::from_fn(1, 7, 1, |_, ant, _| {
        Complex64::new(if ant == g { 5.0 } else { 0.5 }, 0.0)
    })
    .unwrap();
    let obj = Objective::new(&h, 1.0).unwrap();
    let state = SelectionState::from_places(&t, &[a, b]).unwrap();
    let enabled = enabled_transitions(&state, &obj, &RpnConfig::default()).unwrap();
    assert!(enabled.iter().any(|tr| tr.from == b && tr.to == g));
    assert!(!enabled
        .iter()
        .any(|tr| (tr.from, tr.to) == (a, b) || (tr.from, tr.to) == (b, a)));
}

#[test]
fn firings_match_reference_guards_on_both_edge_rules() {
    let h = scene_channel(32, 4, 3);
    let obj = Objective::new(&h, RHO).unwrap();
    for rule in [EdgeRule::LowerEndpoint, EdgeRule::Directed] {
        let t = build_toroid_with(4, 8, rule).unwrap();
        let cfg = RpnConfig::default();
        let mut fired = 0;
        for seed in 0..10 {
            let (initial, end, stats) =
                run_seeded(&t, &obj, &cfg, 4 + seed as usize, seed, &mut FlopLedger::new()).unwrap();
            let mut state = initial;
            for r in &stats.trace {
                assert!(r.delta > cfg.tolerance);
                let (before, after) = guard_capacities(&state, &obj, &cfg, r.from, r.to).unwrap();
                assert!((after - before - r.delta).abs() <= 1e-12);
                assert!((reference_delta(&state, &obj, r.from, r.to) - r.delta).abs() <= 1e-9);
                let mut places = state.token_places();
                places.retain(|&p| p != r.from);
                places.push(r.to);
                state = SelectionState::from_places(&t, &places).unwrap();
                fired += 1;
            }
            assert_eq!(state, end);
        }
        assert!(fired > 0);
    }
}

#[test]
fn converged_runs_carry_a_fixpoint_certificate() {
    let t = build_toroid(4, 16).unwrap();
    let h = scene_channel(64, 8, 1);
    let obj = Objective::new(&h, RHO).unwrap();
    for scaling in [GuardScaling::Local, GuardScaling::Global] {
        let cfg = RpnConfig {
            scaling,
            ..RpnConfig::default()
        };
        for seed in 0..10 {
            let (_, end, stats) = run_seeded(&t, &obj, &cfg, 12, seed, &mut FlopLedger::new()).unwrap();
            if stats.converged {
                assert!(enabled_transitions(&end, &obj, &cfg).unwrap().is_empty());
            }
        }
    }
}

#[test]
fn eight_place_fixpoint_is_locally_optimal() {
    let t = build_toroid(2, 4).unwrap();
    let cfg = RpnConfig::default();
    for seed in 0..20 {
        let h = scene_channel(8, 2, 100 + seed);
        let obj = Objective::new(&h, RHO).unwrap();
        let (_, end, stats) = run_seeded(&t, &obj, &cfg, 4, seed, &mut FlopLedger::new()).unwrap();
        assert!(stats.converged);
        for &(a, b) in &t.edges {
            for (from, to) in [(a, b), (b, a)] {
                if end.has_token(from) && !end.has_token(to) {
                    assert!(reference_delta(&end, &obj, from, to) <= cfg.tolerance + 1e-9);
                }
            }
        }
    }
}

#[test]
fn stable_marking_stops_after_one_pass() {
    let t = build_toroid(2, 4).unwrap();
    let h = scene_channel(8, 2, 5);
    let obj = Objective::new(&h, RHO).unwrap();
    let (_, end, _) = run_seeded(&t, &obj, &RpnConfig::default(), 3, 0, &mut FlopLedger::new()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (again, stats) = run_to_fixpoint(
        end.clone(),
        &obj,
        &RpnConfig::default(),
        &mut rng,
        &mut FlopLedger::new(),
    )
    .unwrap();
    assert_eq!((stats.passes, stats.firings), (1, 0));
    assert_eq!(again, end);
}

#[test]
fn pass_cap_reports_non_convergence() {
    let t = build_toroid(4, 16).unwrap();
    let h = scene_channel(64, 16, 2);
    let obj = Objective::new(&h, RHO).unwrap();
    let cfg = RpnConfig {
        max_passes: 1,
        ..RpnConfig::default()
    };
    let (_, _, stats) = run_seeded(&t, &obj, &cfg, 16, 0, &mut FlopLedger::new()).unwrap();
    assert_eq!(stats.passes, 1);
    assert_eq!(stats.converged, stats.firings == 0);
    assert!(run_seeded(
        &t,
        &obj,
        &RpnConfig { max_passes: 0, ..cfg },
        16,
        0,
        &mut FlopLedger::new()
    )
    .is_err());
}

#[test]
fn race_matches_sequential_runs() {
    let t = build_toroid(4, 16).unwrap();
    let h = scene_channel(64, 4, 7);
    let obj = Objective::new(&h, RHO).unwrap();
    let cfg = RpnConfig::default();
    let seeds = [11, 12, 13, 14, 15];
    let mut ledger = FlopLedger::new();
    let result = race(&t, &obj, &cfg, 8, &seeds, &mut ledger).unwrap();
    let mut sequential = FlopLedger::new();
    for (i, &s) in seeds.iter().enumerate() {
        let (_, end, stats) = run_seeded(&t, &obj, &cfg, 8, s, &mut sequential).unwrap();
        assert_eq!(result.finals[i], end);
        assert_eq!(result.stats[i], stats);
        assert!(result.stats[result.best_index].final_capacity >= stats.final_capacity);
    }
    assert_eq!(ledger.total(), sequential.total());
    assert_eq!(result.best, result.finals[result.best_index]);

    let single = race(&t, &obj, &cfg, 8, &seeds[..1], &mut FlopLedger::new()).unwrap();
    assert_eq!(single.best, result.finals[0]);
    assert!(race(&t, &obj, &cfg, 8, &[], &mut FlopLedger::new()).is_err());
}

#[test]
fn best_of_five_beats_single_run_on_average() {
    let t = build_toroid(4, 16).unwrap();
    let cfg = RpnConfig::default();
    let (mut five, mut one) = (0.0, 0.0);
    for seed in 0..50u64 {
        let h = scene_channel(64, 4, 1000 + seed);
        let obj = Objective::new(&h, RHO).unwrap();
        let seeds: Vec<u64> = (0..5).map(|i| seed * 10 + i).collect();
        let r5 = race(&t, &obj, &cfg, 8, &seeds, &mut FlopLedger::new()).unwrap();
        let r1 = race(&t, &obj, &cfg, 8, &seeds[..1], &mut FlopLedger::new()).unwrap();
        five += r5.stats[r5.best_index].final_capacity;
        one += r1.stats[0].final_capacity;
    }
    assert!(five >= one, "best of 5 {five:.3} vs single {one:.3}");
}

#[test]
fn trace_text_replays() {
    let t = build_toroid(4, 16).unwrap();
    let h = scene_channel(64, 16, 4);
    let obj = Objective::new(&h, RHO).unwrap();
    let (initial, end, stats) = run_seeded(&t, &obj, &RpnConfig::default(), 16, 3, &mut FlopLedger::new()).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &stats.trace).unwrap();
    let trace = read_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(trace, stats.trace);
    assert_eq!(replay_backward(&end, &trace).unwrap(), initial);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_conserve_tokens_and_replay(seed in 0u64..10_000, tokens in 1usize..=32, channel_seed in 0u64..8) {
        let t = build_toroid(4, 8).unwrap();
        let h = scene_channel(32, 4, channel_seed);
        let obj = Objective::new(&h, RHO).unwrap();
        let cfg = RpnConfig::default();
        let (initial, end, stats) = run_seeded(&t, &obj, &cfg, tokens, seed, &mut FlopLedger::new()).unwrap();
        prop_assert_eq!(end.token_count(), tokens);
        prop_assert_eq!(end.marking().iter().filter(|&&m| m).count(), tokens);
        prop_assert_eq!(end.selected_antennas().len(), tokens);
        prop_assert!(stats.passes >= 1 && stats.passes <= cfg.max_passes);
        prop_assert_eq!(stats.firings, stats.trace.len());
        prop_assert!(stats.trace.iter().all(|r| r.delta > cfg.tolerance && t.edges.contains(&(r.from.min(r.to), r.from.max(r.to)))));
        prop_assert_eq!(replay_backward(&end, &stats.trace).unwrap(), initial);

        let (_, again, stats2) = run_seeded(&t, &obj, &cfg, tokens, seed, &mut FlopLedger::new()).unwrap();
        prop_assert_eq!(again, end);
        prop_assert_eq!(stats2, stats);
    }
}
