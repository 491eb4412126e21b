//! Capacity kernels against independent oracles.

use nalgebra::{Complex as NaComplex, DMatrix};
use num_complex::Complex64;
use proptest::prelude::*;
use rpn_mimo::numerics::{
    logdet_hermitian_psd, rate_from_gains, sum_capacity, sum_capacity_user_form, waterfill, waterfill_zf, zf_gains,
    zf_sum_rate, ComplexMatrix, PowerAllocation, SnrConfig,
};

fn matrix_from(rows: usize, cols: usize, parts: &[(f64, f64)]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |r, c| {
        let (re, im) = parts[r * cols + c];
        Complex64::new(re, im)
    })
}

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<NaComplex<f64>> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| NaComplex::new(m[(i, j)].re, m[(i, j)].im))
}

/// `I + A A^H`, symmetrised so it is exactly Hermitian.
fn shifted_gram(a: &ComplexMatrix) -> ComplexMatrix {
    let g = a.matmul(&a.adjoint());
    let n = g.rows();
    ComplexMatrix::from_fn(n, n, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5).add_identity()
}

fn eigen_log2det(m: &ComplexMatrix) -> f64 {
    to_nalgebra(m).symmetric_eigenvalues().iter().map(|l| l.log2()).sum()
}

/// Water level by bisection on the budget, then `p_k = max(0, mu - floor_k)`.
fn bisection_waterfill(gains: &[f64], snr_eff: f64) -> Vec<f64> {
    let floors: Vec<f64> = gains.iter().map(|g| 1.0 / (snr_eff * g)).collect();
    let used = |mu: f64| floors.iter().map(|f| (mu - f).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, floors.iter().cloned().fold(0.0, f64::max) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    floors.iter().map(|f| (mu - f).max(0.0)).collect()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n)
}

fn normalised(raw: &[f64]) -> PowerAllocation {
    let total: f64 = raw.iter().sum();
    PowerAllocation::new(raw.iter().map(|w| w / total).collect()).unwrap()
}

#[test]
fn logdet_of_seeded_4x4_matches_eigenvalues() {
    let parts: Vec<(f64, f64)> = (0..24)
        .map(|i| ((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()))
        .collect();
    let m = shifted_gram(&matrix_from(4, 6, &parts));
    let ours = logdet_hermitian_psd(&m).unwrap();
    let oracle = eigen_log2det(&m);
    assert!((ours - oracle).abs() <= 1e-9 * oracle.abs());
}

#[test]
fn seeded_3x2_capacity_forms_agree_at_minus_five_db() {
    let parts = [
        (0.3, -1.1),
        (0.8, 0.2),
        (-0.5, 0.7),
        (1.4, -0.3),
        (0.1, 0.9),
        (-1.2, -0.4),
    ];
    let h = matrix_from(3, 2, &parts);
    let p = PowerAllocation::uniform(2);
    let snr = SnrConfig::from_db(-5.0, 3, 2).unwrap();
    let a = sum_capacity(&h, &p, &snr).unwrap();
    let b = sum_capacity_user_form(&h, &p, &snr).unwrap();
    assert!((a - b).abs() <= 1e-9 * a);
}

#[test]
fn waterfill_matches_bisection_for_unequal_pair() {
    let p = waterfill(&[1.0, 0.25], 1.0).unwrap();
    let oracle = bisection_waterfill(&[1.0, 0.25], 1.0);
    for (a, b) in p.weights().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    // Floors 1 and 4 leave the weak channel dry.
    assert_eq!(p.weights(), &[1.0, 0.0]);
}

#[test]
fn zf_gains_match_explicit_inverse() {
    let parts = [
        (1.0, 0.5),
        (0.2, -0.3),
        (-0.4, 0.8),
        (0.6, 0.1),
        (0.9, -0.7),
        (-0.2, 0.4),
    ];
    let h = matrix_from(3, 2, &parts);
    let gram = to_nalgebra(&h.adjoint().matmul(&h));
    let inv = gram.try_inverse().unwrap();
    let gains = zf_gains(&h).unwrap();
    for (k, g) in gains.iter().enumerate() {
        assert!((g - 1.0 / inv[(k, k)].re).abs() <= 1e-9 * g);
    }
}

#[test]
fn zero_row_lowers_positive_capacity() {
    let parts = [(0.7, 0.1), (-0.2, 0.5), (0.3, -0.9), (1.1, 0.2)];
    let h = matrix_from(2, 2, &parts);
    let mut padded = parts.to_vec();
    padded.extend([(0.0, 0.0), (0.0, 0.0)]);
    let h3 = matrix_from(3, 2, &padded);
    let p = PowerAllocation::uniform(2);
    let c2 = sum_capacity(&h, &p, &SnrConfig::new(1.0, 2, 2).unwrap()).unwrap();
    let c3 = sum_capacity(&h3, &p, &SnrConfig::new(1.0, 3, 2).unwrap()).unwrap();
    assert!(c2 > 0.0 && c3 < c2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logdet_matches_eigenvalue_oracle(n in 1usize..=12, parts in entries(12 * 14)) {
        let a = matrix_from(n, n + 2, &parts[..n * (n + 2)]);
        let m = shifted_gram(&a);
        let ours = logdet_hermitian_psd(&m).unwrap();
        let oracle = eigen_log2det(&m);
        prop_assert!((ours - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn capacity_forms_agree_and_are_non_negative(
        n_ts in 1usize..=8,
        n_r in 1usize..=6,
        parts in entries(48),
        raw in prop::collection::vec(0.01..1.0f64, 6),
        rho in 0.01..50.0f64,
    ) {
        let h = matrix_from(n_ts, n_r, &parts[..n_ts * n_r]);
        let p = normalised(&raw[..n_r]);
        let snr = SnrConfig::new(rho, n_ts, n_r).unwrap();
        let a = sum_capacity(&h, &p, &snr).unwrap();
        let b = sum_capacity_user_form(&h, &p, &snr).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn waterfill_satisfies_kkt_and_budget(
        gains in prop::collection::vec(1e-3..1e2f64, 1..16),
        snr_eff in 1e-2..1e2f64,
    ) {
        let p = waterfill(&gains, snr_eff).unwrap();
        let w = p.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        // A common level mu with p_k = max(0, mu - floor_k).
        let floors: Vec<f64> = gains.iter().map(|g| 1.0 / (snr_eff * g)).collect();
        let active: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
        let mu = active.iter().map(|&k| w[k] + floors[k]).sum::<f64>() / active.len() as f64;
        for k in 0..w.len() {
            prop_assert!((w[k] - (mu - floors[k]).max(0.0)).abs() <= 1e-9);
        }
        let oracle = bisection_waterfill(&gains, snr_eff);
        for (a, b) in w.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn waterfilled_zf_rate_beats_uniform(n_ts in 2usize..=8, parts in entries(16), rho in 0.05..20.0f64) {
        let n_r = 2;
        let h = matrix_from(n_ts, n_r, &parts[..n_ts * n_r]);
        prop_assume!(zf_gains(&h).is_ok());
        let snr = SnrConfig::new(rho, n_ts, n_r).unwrap();
        let p = waterfill_zf(&h, &snr).unwrap();
        let filled = zf_sum_rate(&h, &p, &snr).unwrap();
        let uniform = zf_sum_rate(&h, &PowerAllocation::uniform(n_r), &snr).unwrap();
        prop_assert!(filled >= uniform - 1e-12);
        let gains = zf_gains(&h).unwrap();
        prop_assert!((rate_from_gains(&gains, &p, snr.effective()) - filled).abs() <= 1e-12);
    }
}
