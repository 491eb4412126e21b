//! Cost model, ledgers and scaling fits.

use proptest::prelude::*;
use rpn_mimo::baselines::{greedy_trace, nearest_neighbours, nn_select, NnConfig};
use rpn_mimo::channel::{generate_channel, normalize_channel, ChannelTensor, SceneConfig};
use rpn_mimo::metrics::{
    compare_flops, fit_loglog_slope, flops_capacity, flops_logdet, flops_matmul, flops_objective, measure_scaling,
    measure_scaling_with, Algorithm, CostBasis, FlopLedger, ScalingTemplate,
};
use rpn_mimo::objective::Objective;
use rpn_mimo::rpn::{race, RpnConfig};
use rpn_mimo::topology::build_toroid;

const RHO_DB: f64 = -5.0;
const RHO: f64 = 0.316_227_766_016_837_94;

fn scene(n_tx: usize, n_users: usize) -> SceneConfig {
    SceneConfig {
        n_tx,
        n_users,
        n_subcarriers: 4,
        ..SceneConfig::default()
    }
}

fn channel(n_tx: usize, n_users: usize, seed: u64) -> ChannelTensor {
    normalize_channel(
        &generate_channel(&SceneConfig {
            seed,
            ..scene(n_tx, n_users)
        })
        .unwrap(),
    )
    .unwrap()
}

#[test]
fn logdet_cost_formula() {
    // One log and one add.
    assert_eq!(flops_logdet(1), 2);
    // 3 n (n - 1) + 3 n - 1 at n = 2.
    assert_eq!(flops_logdet(2), 11);
    let r64 = flops_logdet(128) as f64 / flops_logdet(64) as f64;
    let r128 = flops_logdet(256) as f64 / flops_logdet(128) as f64;
    assert!((r128 - 8.0).abs() < (r64 - 8.0).abs());
    assert!((r128 - 8.0).abs() < 0.2);
}

#[test]
fn capacity_cost_is_the_literal_product() {
    let (n_ts, n_r) = (5, 3);
    let expected = flops_matmul(n_ts, n_r, n_r) + flops_matmul(n_ts, n_r, n_ts) + 2 * 25 + 5 + flops_logdet(5);
    assert_eq!(flops_capacity(n_ts, n_r), expected);
    assert_eq!(flops_objective(n_ts, n_r, 4), 4 * (expected + 1));
    assert_eq!(flops_objective(0, n_r, 4), 0);
}

#[test]
fn greedy_to_full_array_matches_closed_form() {
    let (n_tx, n_r) = (16, 4);
    let table = compare_flops(
        &scene(n_tx, n_r),
        4,
        4,
        RHO_DB,
        &[n_tx],
        &[0, 1],
        5,
        5,
        CostBasis::Selected,
    )
    .unwrap();
    let expected: u64 = (0..n_tx)
        .map(|r| (n_tx - r) as u64 * flops_objective(r + 1, n_r, 4))
        .sum();
    assert_eq!(table.rows[0].greedy_flops, expected as f64);
}

#[test]
fn rpn_is_cheaper_than_nn_at_every_count() {
    let grid: Vec<usize> = (1..=8).map(|i| 2 * i).collect();
    let table = compare_flops(
        &scene(16, 4),
        4,
        4,
        RHO_DB,
        &grid,
        &[0, 1, 2],
        5,
        50,
        CostBasis::Selected,
    )
    .unwrap();
    for row in &table.rows {
        assert!(row.rpn_flops < row.nn_flops, "n = {}: {row:?}", row.n_selected);
    }
    assert!(table.nn_selected_mean >= 1.0);
}

#[test]
fn doubling_race_width_doubles_flops() {
    let grid = [4, 8, 16];
    let seeds: Vec<u64> = (0..40).collect();
    let k5 = compare_flops(&scene(64, 4), 4, 16, RHO_DB, &grid, &seeds, 5, 1, CostBasis::Selected).unwrap();
    let k10 = compare_flops(&scene(64, 4), 4, 16, RHO_DB, &grid, &seeds, 10, 1, CostBasis::Selected).unwrap();
    for (a, b) in k5.rows.iter().zip(&k10.rows) {
        let ratio = b.rpn_flops / a.rpn_flops;
        assert!((ratio - 2.0).abs() <= 0.1, "n = {}: ratio {ratio:.3}", a.n_selected);
    }
}

#[test]
fn ledgers_are_complete_and_deterministic() {
    let h = channel(16, 4, 3);
    let obj = Objective::new(&h, RHO).unwrap();
    let t = build_toroid(4, 4).unwrap();

    let mut ledger = FlopLedger::new();
    let trace = greedy_trace(&obj, 6, &mut ledger).unwrap();
    let candidates: u64 = (0..6).map(|r| 16 - r as u64).sum();
    assert_eq!(ledger.evaluations_for("greedy"), candidates);
    assert_eq!(*trace.cumulative_flops.last().unwrap(), ledger.total());

    let cfg = NnConfig {
        iterations: 7,
        ..NnConfig::default()
    };
    let nbrs = nearest_neighbours(16, h.tx_positions(), 15);
    nn_select(&obj, &nbrs, &cfg, 1, &mut ledger).unwrap();
    assert_eq!(ledger.get("nn", "membership").unwrap().evaluations, 7 * 16 * 2);
    assert!(ledger.get("nn", "select").unwrap().evaluations <= 7);

    let mut a = FlopLedger::new();
    let r = race(&t, &obj, &RpnConfig::default(), 6, &[1, 2, 3], &mut a).unwrap();
    let mut b = FlopLedger::new();
    race(&t, &obj, &RpnConfig::default(), 6, &[1, 2, 3], &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.total_for("rpn"), r.stats.iter().map(|s| s.flops).sum::<u64>());
    assert_eq!(a.get("rpn", "select").unwrap().evaluations, 3);

    ledger.merge(&a);
    assert_eq!(ledger.total(), ledger.recompute_from_shapes());
}

#[test]
fn neighbourhood_basis_charges_more_but_changes_nothing_else() {
    let h = channel(64, 4, 5);
    let obj = Objective::new(&h, RHO).unwrap();
    let t = build_toroid(4, 16).unwrap();
    let sel = RpnConfig::default();
    let wide = RpnConfig {
        cost_basis: CostBasis::Neighbourhood,
        ..sel
    };
    let (mut la, mut lb) = (FlopLedger::new(), FlopLedger::new());
    let a = race(&t, &obj, &sel, 16, &[4, 5], &mut la).unwrap();
    let b = race(&t, &obj, &wide, 16, &[4, 5], &mut lb).unwrap();
    assert_eq!(a.finals, b.finals);
    let (ga, gb) = (la.get("rpn", "guard").unwrap(), lb.get("rpn", "guard").unwrap());
    assert_eq!(ga.evaluations, gb.evaluations);
    assert!(gb.flops > ga.flops);
    // Every guard on the 4 x 16 toroid is charged as an 8-row evaluation.
    assert_eq!(gb.flops, gb.evaluations * flops_objective(8, 4, 4));
}

#[test]
fn slope_fit_recovers_power_laws() {
    let grid = [16, 64, 256];
    // `n_t^power` fixed-shape evaluations per run.
    let dummy = |power: u32| {
        measure_scaling_with("dummy", "node", &grid, &[0, 1], move |n_t, _, ledger| {
            for _ in 0..n_t.pow(power) {
                ledger.record_objective("dummy", "node", 4, 2, 1);
            }
            Ok(())
        })
        .unwrap()
    };
    let flat = dummy(0);
    assert!(flat.slope_total.abs() <= 0.05 && flat.slope_per_node.abs() <= 0.05);
    let square = dummy(2);
    assert!((square.slope_total - 2.0).abs() <= 1e-9);
    assert!(square.slope_per_node.abs() <= 1e-9);
    assert!(fit_loglog_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(measure_scaling_with("dummy", "node", &[16, 64], &[0], |_, _, _| Ok(())).is_err());
}

#[test]
fn worst_case_slopes_separate_rpn_from_nn() {
    let template = ScalingTemplate::default();
    let grid = [16, 64, 256];
    let seeds = [0, 1];
    let rpn = measure_scaling(Algorithm::Rpn { k_race: 5 }, &grid, &template, &seeds).unwrap();
    let nn = measure_scaling(Algorithm::Nn { iterations: 10 }, &grid, &template, &seeds).unwrap();
    assert!((nn.slope_per_node - 3.0).abs() <= 0.5, "nn {}", nn.slope_per_node);
    assert!(rpn.slope_per_node < nn.slope_per_node);
    assert!(rpn.slope_total < nn.slope_total);
    assert!(measure_scaling(Algorithm::Rpn { k_race: 1 }, &[16, 48, 64], &template, &seeds).is_err());
}

proptest! {
    #[test]
    fn cost_model_is_monotone(n in 1usize..200, r in 1usize..32, s in 1usize..64) {
        prop_assert!(flops_logdet(n + 1) > flops_logdet(n));
        prop_assert!(flops_capacity(n + 1, r) > flops_capacity(n, r));
        prop_assert!(flops_capacity(n, r + 1) > flops_capacity(n, r));
        prop_assert_eq!(flops_objective(n, r, s), s as u64 * (flops_capacity(n, r) + 1));
    }
}
