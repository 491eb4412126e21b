//! Capacity arithmetic on complex channel submatrices.
//!
//! The selection objective is
//!
//! ```text
//! C = log2 det(I + rho * (N_R / N_TS) * H_c * P * H_c^H)
//! ```
//!
//! with `H_c` the `N_TS x N_R` rows of the selected antennas and `P` a diagonal
//! power split over users summing to one. Zero-forcing evaluation uses the
//! per-user gains `g_k = 1 / [(H_c^H H_c)^-1]_kk` and a water-filled `P`.

mod matrix;

use num_complex::Complex64;

pub use matrix::ComplexMatrix;

use crate::error::{Error, Result};

/// Hermitian symmetry tolerance accepted by [`logdet_hermitian_psd`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Largest Gram condition number still treated as full column rank
/// (the square of a `1e12` channel condition number).
pub const MAX_GRAM_CONDITION: f64 = 1e24;

/// Diagonal of the user power matrix `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    weights: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Contract("power allocation needs at least one user".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract("power weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("power weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// All users get `1 / n_users`.
    pub fn uniform(n_users: usize) -> Self {
        assert!(n_users >= 1);
        Self {
            weights: vec![1.0 / n_users as f64; n_users],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// SNR and the selection/user counts that set the `N_R / N_TS` power scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrConfig {
    pub rho: f64,
    pub n_selected: usize,
    pub n_users: usize,
}

impl SnrConfig {
    pub fn new(rho: f64, n_selected: usize, n_users: usize) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Contract(format!("rho must be positive, got {rho}")));
        }
        if n_selected == 0 || n_users == 0 {
            return Err(Error::Contract("n_selected and n_users must be at least 1".into()));
        }
        Ok(Self {
            rho,
            n_selected,
            n_users,
        })
    }

    pub fn from_db(rho_db: f64, n_selected: usize, n_users: usize) -> Result<Self> {
        Self::new(db_to_linear(rho_db), n_selected, n_users)
    }

    /// Same SNR, different selected count.
    pub fn with_selected(self, n_selected: usize) -> Self {
        assert!(n_selected >= 1);
        Self { n_selected, ..self }
    }

    /// `rho * N_R / N_TS`.
    pub fn effective(&self) -> f64 {
        self.rho * self.n_users as f64 / self.n_selected as f64
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// In-place Cholesky of the `n x n` Hermitian matrix in `a` (row-major, lower
/// triangle read and overwritten). Returns `log2 det(a)`.
///
/// The log is accumulated from the squared pivots so nothing overflows for
/// large matrices.
pub(crate) fn cholesky_log2det(a: &mut [Complex64], n: usize) -> Result<f64> {
    debug_assert_eq!(a.len(), n * n);
    let mut log2det = 0.0;
    for j in 0..n {
        let mut pivot = a[j * n + j].re;
        for k in 0..j {
            pivot -= a[j * n + k].norm_sqr();
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        log2det += pivot.log2();
        if j + 1 == n {
            break;
        }
        let diag = pivot.sqrt();
        a[j * n + j] = Complex64::new(diag, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / diag;
        }
    }
    Ok(log2det)
}

/// `log2 det(m)` for a Hermitian positive-definite matrix.
pub fn logdet_hermitian_psd(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "log-det needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::Contract("log-det input is not Hermitian".into()));
    }
    let mut work = m.as_slice().to_vec();
    cholesky_log2det(&mut work, m.rows())
}

fn check_capacity_shapes(h_c: &ComplexMatrix, p: &PowerAllocation, snr: &SnrConfig) -> Result<()> {
    if h_c.rows() != snr.n_selected || h_c.cols() != snr.n_users {
        return Err(Error::Contract(format!(
            "channel submatrix is {}x{} but snr expects {}x{}",
            h_c.rows(),
            h_c.cols(),
            snr.n_selected,
            snr.n_users
        )));
    }
    if p.len() != snr.n_users {
        return Err(Error::Contract(format!(
            "power allocation has {} users, expected {}",
            p.len(),
            snr.n_users
        )));
    }
    Ok(())
}

/// Sum capacity in bits/s/Hz, evaluated in the `N_TS x N_TS` form.
pub fn sum_capacity(h_c: &ComplexMatrix, p: &PowerAllocation, snr: &SnrConfig) -> Result<f64> {
    check_capacity_shapes(h_c, p, snr)?;
    let hp = h_c.matmul(&ComplexMatrix::diagonal(p.weights()));
    let gram = hp.matmul(&h_c.adjoint());
    let m = gram.scale(snr.effective()).add_identity();
    let mut work = m.as_slice().to_vec();
    Ok(cholesky_log2det(&mut work, m.rows())?.max(0.0))
}

/// Sum capacity evaluated in the `N_R x N_R` form
/// `det(I + c * sqrt(P) H_c^H H_c sqrt(P))`; equal to [`sum_capacity`] by
/// Sylvester's determinant identity.
pub fn sum_capacity_user_form(h_c: &ComplexMatrix, p: &PowerAllocation, snr: &SnrConfig) -> Result<f64> {
    check_capacity_shapes(h_c, p, snr)?;
    let sqrt_p: Vec<f64> = p.weights().iter().map(|w| w.sqrt()).collect();
    let hs = h_c.matmul(&ComplexMatrix::diagonal(&sqrt_p));
    let m = hs.adjoint().matmul(&hs).scale(snr.effective()).add_identity();
    let mut work = m.as_slice().to_vec();
    Ok(cholesky_log2det(&mut work, m.rows())?.max(0.0))
}

/// Zero-forcing gains `1 / [(H_c^H H_c)^-1]_kk`, one per user.
pub fn zf_gains(h_c: &ComplexMatrix) -> Result<Vec<f64>> {
    if h_c.rows() < h_c.cols() {
        return Err(Error::Contract(format!(
            "zero forcing needs N_TS >= N_R, got {}x{}",
            h_c.rows(),
            h_c.cols()
        )));
    }
    let n = h_c.cols();
    let gram = h_c.adjoint().matmul(h_c);
    let mut l = gram.as_slice().to_vec();
    let mut pivots = Vec::with_capacity(n);
    // Cholesky that keeps the factor; a failed pivot means rank deficiency.
    for j in 0..n {
        let mut pivot = l[j * n + j].re;
        for k in 0..j {
            pivot -= l[j * n + k].norm_sqr();
        }
        if !(pivot > 0.0) {
            return Err(Error::RankDeficient {
                condition: f64::INFINITY,
            });
        }
        pivots.push(pivot);
        let diag = pivot.sqrt();
        l[j * n + j] = Complex64::new(diag, 0.0);
        for i in j + 1..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / diag;
        }
    }
    let max_p = pivots.iter().cloned().fold(0.0, f64::max);
    let min_p = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = max_p / min_p;
    if !(condition < MAX_GRAM_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    // (G^-1)_kk = sum_i |(L^-1)_ik|^2; solve L x = e_k column by column.
    let mut gains = Vec::with_capacity(n);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let mut acc = 0.0;
        for i in k..n {
            let mut s = if i == k {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for m in k..i {
                s -= l[i * n + m] * x[m];
            }
            x[i] = s / l[i * n + i].re;
            acc += x[i].norm_sqr();
        }
        gains.push(1.0 / acc);
    }
    Ok(gains)
}

/// Water-filling over parallel channels with gains `gains` and scaling
/// `snr_eff`, unit power budget.
///
/// Exact active-set solution: sort by gain, keep the largest prefix whose
/// water level stays above every member's floor `1 / (snr_eff * g)`.
pub fn waterfill(gains: &[f64], snr_eff: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return Err(Error::Contract("water-filling needs at least one channel".into()));
    }
    if gains.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::Domain("water-filling gains must be positive and finite".into()));
    }
    if !(snr_eff > 0.0) {
        return Err(Error::Contract("water-filling needs a positive SNR".into()));
    }
    let floors: Vec<f64> = gains.iter().map(|g| 1.0 / (snr_eff * g)).collect();
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]).then(a.cmp(&b)));

    let mut level = 1.0 + floors[order[0]];
    let mut active = 1;
    let mut floor_sum = floors[order[0]];
    for (m, &idx) in order.iter().enumerate().skip(1) {
        let candidate = (1.0 + floor_sum + floors[idx]) / (m + 1) as f64;
        if candidate > floors[idx] {
            floor_sum += floors[idx];
            level = candidate;
            active = m + 1;
        } else {
            break;
        }
    }
    let mut weights = vec![0.0; gains.len()];
    for &idx in &order[..active] {
        weights[idx] = (level - floors[idx]).max(0.0);
    }
    // Remove the last ulp of drift so the budget is exact.
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    PowerAllocation::new(weights)
}

fn check_zf_shapes(h_c: &ComplexMatrix, snr: &SnrConfig) -> Result<()> {
    if h_c.rows() != snr.n_selected || h_c.cols() != snr.n_users {
        return Err(Error::Contract(format!(
            "channel submatrix is {}x{} but snr expects {}x{}",
            h_c.rows(),
            h_c.cols(),
            snr.n_selected,
            snr.n_users
        )));
    }
    Ok(())
}

/// Water-filled power split for zero-forcing transmission over `h_c`.
pub fn waterfill_zf(h_c: &ComplexMatrix, snr: &SnrConfig) -> Result<PowerAllocation> {
    check_zf_shapes(h_c, snr)?;
    let gains = zf_gains(h_c)?;
    waterfill(&gains, snr.effective())
}

/// `sum_k log2(1 + snr_eff * p_k * g_k)`.
pub fn rate_from_gains(gains: &[f64], p: &PowerAllocation, snr_eff: f64) -> f64 {
    gains
        .iter()
        .zip(p.weights())
        .map(|(g, w)| (snr_eff * w * g).ln_1p() / std::f64::consts::LN_2)
        .sum()
}

/// Zero-forcing sum rate of `h_c` under power split `p`.
pub fn zf_sum_rate(h_c: &ComplexMatrix, p: &PowerAllocation, snr: &SnrConfig) -> Result<f64> {
    check_zf_shapes(h_c, snr)?;
    if p.len() != snr.n_users {
        return Err(Error::Contract(
            "power allocation length differs from user count".into(),
        ));
    }
    let gains = zf_gains(h_c)?;
    Ok(rate_from_gains(&gains, p, snr.effective()))
}
