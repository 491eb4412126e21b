//! Subcarrier-averaged sum capacity with uniform user power, the score every
//! selection algorithm optimises.
//!
//! For an antenna set `S` and scaling count `n_ts` the value is
//! `mean_f log2 det(I + (rho / n_ts) H_f[S] H_f[S]^H)`, i.e. the capacity
//! expression with `P = I / N_R`. Internally the smaller of the two
//! equivalent determinants (`|S| x |S|` or `N_R x N_R`) is factorised.

use num_complex::Complex64;

use crate::channel::ChannelTensor;
use crate::error::{Error, Result};
use crate::metrics::FlopLedger;
use crate::numerics::{self, cholesky_log2det, ComplexMatrix, PowerAllocation, SnrConfig};

/// Evaluates the selection objective on one channel.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    channel: &'a ChannelTensor,
    rho: f64,
}

impl<'a> Objective<'a> {
    pub fn new(channel: &'a ChannelTensor, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Contract(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { channel, rho })
    }

    pub fn channel(&self) -> &'a ChannelTensor {
        self.channel
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_users(&self) -> usize {
        self.channel.n_users()
    }

    /// Objective of `antennas` with the power scaling set by `n_ts`.
    /// Empty sets score zero.
    pub fn capacity_scaled(&self, antennas: &[usize], n_ts: usize) -> f64 {
        if antennas.is_empty() {
            return 0.0;
        }
        debug_assert!(n_ts >= 1);
        let h = self.channel;
        let n_r = h.n_users();
        let k = antennas.len();
        let c = self.rho / n_ts as f64;
        let mut total = 0.0;
        if k <= n_r {
            let mut m = vec![Complex64::new(0.0, 0.0); k * k];
            for s in 0..h.n_subcarriers() {
                for (i, &a) in antennas.iter().enumerate() {
                    let ra = h.antenna_row(s, a);
                    for (j, &b) in antennas.iter().enumerate().take(i + 1) {
                        let rb = h.antenna_row(s, b);
                        let dot: Complex64 = ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum();
                        m[i * k + j] = dot * c;
                    }
                    m[i * k + i] += 1.0;
                }
                total += cholesky_log2det(&mut m, k).expect("I + PSD is positive definite");
            }
        } else {
            let mut m = vec![Complex64::new(0.0, 0.0); n_r * n_r];
            for s in 0..h.n_subcarriers() {
                m.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                for &a in antennas {
                    accumulate_outer(&mut m, h.antenna_row(s, a), n_r);
                }
                finish_user_form(&mut m, n_r, c);
                total += cholesky_log2det(&mut m, n_r).expect("I + PSD is positive definite");
            }
        }
        (total / h.n_subcarriers() as f64).max(0.0)
    }

    /// Objective of `antennas` with `n_ts = |antennas|`.
    pub fn capacity(&self, antennas: &[usize]) -> f64 {
        self.capacity_scaled(antennas, antennas.len().max(1))
    }

    /// [`Self::capacity_scaled`], charging the evaluation to `ledger`.
    pub fn capacity_logged(
        &self,
        antennas: &[usize],
        n_ts: usize,
        ledger: &mut FlopLedger,
        algorithm: &str,
        phase: &str,
    ) -> f64 {
        self.capacity_charged(antennas, n_ts, antennas.len(), ledger, algorithm, phase)
    }

    /// As [`Self::capacity_logged`], but charged as a `charged_rows`-row evaluation.
    pub fn capacity_charged(
        &self,
        antennas: &[usize],
        n_ts: usize,
        charged_rows: usize,
        ledger: &mut FlopLedger,
        algorithm: &str,
        phase: &str,
    ) -> f64 {
        ledger.record_objective(
            algorithm,
            phase,
            charged_rows,
            self.n_users(),
            self.channel.n_subcarriers(),
        );
        self.capacity_scaled(antennas, n_ts)
    }

    /// Reference evaluation through [`numerics::sum_capacity`] (general
    /// power path), averaged over subcarriers.
    pub fn capacity_reference(&self, antennas: &[usize], n_ts: usize) -> Result<f64> {
        if antennas.is_empty() {
            return Ok(0.0);
        }
        let n_r = self.n_users();
        // Scaling uses n_ts, but the matrix has |antennas| rows: fold the
        // ratio into rho so SnrConfig sees the true row count.
        let rho = self.rho * antennas.len() as f64 / n_ts as f64;
        let snr = SnrConfig::new(rho, antennas.len(), n_r)?;
        let p = PowerAllocation::uniform(n_r);
        let mut total = 0.0;
        for s in 0..self.channel.n_subcarriers() {
            total += numerics::sum_capacity(&self.channel.submatrix(s, antennas), &p, &snr)?;
        }
        Ok(total / self.channel.n_subcarriers() as f64)
    }
}

/// Adds `conj(row) row^T` into the lower triangle of the `n x n` buffer.
pub(crate) fn accumulate_outer(m: &mut [Complex64], row: &[Complex64], n: usize) {
    for i in 0..n {
        let ri = row[i].conj();
        for j in 0..=i {
            m[i * n + j] += ri * row[j];
        }
    }
}

/// Turns an accumulated Gram lower triangle into `I + c G`.
pub(crate) fn finish_user_form(m: &mut [Complex64], n: usize, c: f64) {
    for i in 0..n {
        for j in 0..=i {
            m[i * n + j] *= c;
        }
        m[i * n + i] += 1.0;
    }
}

/// Zero-forcing rate of `antennas` with water-filled power, averaged over
/// subcarriers. Subcarriers where the selection cannot zero-force (fewer
/// antennas than users, or a rank-deficient submatrix) contribute zero and
/// clear the returned feasibility flag.
pub fn zf_waterfilled_rate(channel: &ChannelTensor, antennas: &[usize], rho: f64) -> (f64, bool) {
    let n_r = channel.n_users();
    if antennas.len() < n_r {
        return (0.0, false);
    }
    let snr = match SnrConfig::new(rho, antennas.len(), n_r) {
        Ok(s) => s,
        Err(_) => return (0.0, false),
    };
    let mut total = 0.0;
    let mut feasible = true;
    for s in 0..channel.n_subcarriers() {
        let h_c: ComplexMatrix = channel.submatrix(s, antennas);
        match numerics::zf_gains(&h_c).and_then(|g| {
            let p = numerics::waterfill(&g, snr.effective())?;
            Ok(numerics::rate_from_gains(&g, &p, snr.effective()))
        }) {
            Ok(rate) => total += rate,
            Err(_) => feasible = false,
        }
    }
    (total / channel.n_subcarriers() as f64, feasible)
}
