//! Wideband channel tensors: generation, normalisation and degradation.
//!
//! A [`ChannelTensor`] holds one `n_tx x n_users` complex matrix per
//! subcarrier. [`generate_channel`] synthesises one from a random
//! single-bounce scene (see [`scene`]); [`perturb_csi`] and
//! [`subsample_subcarriers`] produce the degraded views the selection
//! algorithms may be fed, while rates are always scored on the original.

mod io;
pub mod scene;

use num_complex::Complex64;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use io::{read_channel, write_channel};
pub use scene::{Point, Rect, Scene};

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Scene and waveform parameters for the synthetic channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Area width in metres.
    pub width: f64,
    /// Area height in metres.
    pub height: f64,
    pub n_tx: usize,
    pub n_users: usize,
    pub n_scatterers: usize,
    pub n_obstacles: usize,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Occupied bandwidth in Hz.
    pub bandwidth: f64,
    pub n_subcarriers: usize,
    pub shadow_sigma_db: f64,
    pub pathloss_exponent: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 100.0,
            height: 100.0,
            n_tx: 64,
            n_users: 16,
            n_scatterers: 75,
            n_obstacles: 1,
            carrier_freq: 2.6e9,
            bandwidth: 20e6,
            n_subcarriers: 64,
            shadow_sigma_db: 8.0,
            pathloss_exponent: 3.5,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.width > 0.0 && self.height > 0.0) {
            problems.push("area dimensions must be positive".to_string());
        }
        if self.n_tx == 0 || self.n_users == 0 || self.n_subcarriers == 0 {
            problems.push("n_tx, n_users and n_subcarriers must be at least 1".to_string());
        }
        if !(self.carrier_freq > 0.0) || !(self.bandwidth > 0.0) {
            problems.push("carrier frequency and bandwidth must be positive".to_string());
        }
        if !(self.shadow_sigma_db >= 0.0) || !(self.pathloss_exponent > 0.0) {
            problems.push("shadow sigma must be >= 0 and pathloss exponent > 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Absolute frequency of subcarrier `n`, centred on the carrier.
    pub fn subcarrier_freq(&self, n: usize) -> f64 {
        let spacing = self.bandwidth / self.n_subcarriers as f64;
        let offset = n as f64 - (self.n_subcarriers / 2) as f64;
        self.carrier_freq + offset * spacing
    }
}

/// Complex coefficients indexed `(subcarrier, tx antenna, user)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTensor {
    n_subcarriers: usize,
    n_tx: usize,
    n_users: usize,
    data: Vec<Complex64>,
    tx_positions: Option<Vec<Point>>,
    user_positions: Option<Vec<Point>>,
    /// Original subcarrier index of each slice, after subsampling.
    subcarrier_ids: Vec<usize>,
}

impl ChannelTensor {
    pub fn new(n_subcarriers: usize, n_tx: usize, n_users: usize, data: Vec<Complex64>) -> Result<Self> {
        if n_subcarriers == 0 || n_tx == 0 || n_users == 0 {
            return Err(Error::Contract("channel dimensions must be at least 1".into()));
        }
        if data.len() != n_subcarriers * n_tx * n_users {
            return Err(Error::Contract(format!(
                "channel needs {} coefficients, got {}",
                n_subcarriers * n_tx * n_users,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("channel has non-finite coefficients".into()));
        }
        Ok(Self {
            n_subcarriers,
            n_tx,
            n_users,
            data,
            tx_positions: None,
            user_positions: None,
            subcarrier_ids: (0..n_subcarriers).collect(),
        })
    }

    pub fn from_fn(
        n_subcarriers: usize,
        n_tx: usize,
        n_users: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n_subcarriers * n_tx * n_users);
        for s in 0..n_subcarriers {
            for t in 0..n_tx {
                for u in 0..n_users {
                    data.push(f(s, t, u));
                }
            }
        }
        Self::new(n_subcarriers, n_tx, n_users, data)
    }

    pub fn with_positions(mut self, tx: Vec<Point>, users: Vec<Point>) -> Result<Self> {
        if tx.len() != self.n_tx || users.len() != self.n_users {
            return Err(Error::Contract("position count differs from channel dimensions".into()));
        }
        self.tx_positions = Some(tx);
        self.user_positions = Some(users);
        Ok(self)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, subcarrier: usize, tx: usize, user: usize) -> Complex64 {
        self.data[(subcarrier * self.n_tx + tx) * self.n_users + user]
    }

    /// Coefficients from antenna `tx` to every user at one subcarrier.
    pub fn antenna_row(&self, subcarrier: usize, tx: usize) -> &[Complex64] {
        let start = (subcarrier * self.n_tx + tx) * self.n_users;
        &self.data[start..start + self.n_users]
    }

    /// The `n_tx x n_users` matrix of one subcarrier.
    pub fn subcarrier_matrix(&self, subcarrier: usize) -> ComplexMatrix {
        let start = subcarrier * self.n_tx * self.n_users;
        let slice = self.data[start..start + self.n_tx * self.n_users].to_vec();
        ComplexMatrix::from_row_major(self.n_tx, self.n_users, slice).expect("tensor entries are finite")
    }

    /// Rows of `antennas` at one subcarrier, in the given order.
    pub fn submatrix(&self, subcarrier: usize, antennas: &[usize]) -> ComplexMatrix {
        let mut data = Vec::with_capacity(antennas.len() * self.n_users);
        for &t in antennas {
            data.extend_from_slice(self.antenna_row(subcarrier, t));
        }
        ComplexMatrix::from_row_major(antennas.len(), self.n_users, data).expect("submatrix of a finite tensor")
    }

    pub fn tx_positions(&self) -> Option<&[Point]> {
        self.tx_positions.as_deref()
    }

    pub fn user_positions(&self) -> Option<&[Point]> {
        self.user_positions.as_deref()
    }

    pub fn subcarrier_ids(&self) -> &[usize] {
        &self.subcarrier_ids
    }

    /// Mean of `|h|^2` over every entry.
    pub fn mean_energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// Subcarrier-averaged energy `mean_f |h(f, tx, user)|^2`.
    pub fn link_energy(&self, tx: usize, user: usize) -> f64 {
        (0..self.n_subcarriers)
            .map(|s| self.get(s, tx, user).norm_sqr())
            .sum::<f64>()
            / self.n_subcarriers as f64
    }

    fn map_data(&self, data: Vec<Complex64>) -> Self {
        Self { data, ..self.clone() }
    }
}

/// Complex correlation coefficient `|<a, b>| / (|a| |b|)` between two tensors
/// of equal shape.
pub fn correlation(a: &ChannelTensor, b: &ChannelTensor) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut cross = Complex64::new(0.0, 0.0);
    let (mut ea, mut eb) = (0.0, 0.0);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        cross += x * y.conj();
        ea += x.norm_sqr();
        eb += y.norm_sqr();
    }
    cross.norm() / (ea * eb).sqrt()
}

/// Samples a random scene from `cfg` and synthesises its channel.
pub fn generate_channel(cfg: &SceneConfig) -> Result<ChannelTensor> {
    cfg.validate()?;
    let scene = Scene::sample(cfg);
    scene.channel(cfg)
}

/// Scales the tensor by one real constant so the mean `|h|^2` is one.
pub fn normalize_channel(h: &ChannelTensor) -> Result<ChannelTensor> {
    let energy = h.mean_energy();
    if !(energy > 0.0) {
        return Err(Error::Domain("cannot normalise an all-zero channel".into()));
    }
    let scale = energy.sqrt().recip();
    Ok(h.map_data(h.data.iter().map(|z| z * scale).collect()))
}

/// Imperfect CSI: `sqrt(1 - eps^2) H + eps E`, with `E` circularly-symmetric
/// Gaussian at the mean per-entry energy of `H`.
pub fn perturb_csi(h: &ChannelTensor, error_fraction: f64, seed: u64) -> Result<ChannelTensor> {
    if !(0.0..=1.0).contains(&error_fraction) {
        return Err(Error::Contract(format!(
            "CSI error fraction must lie in [0, 1], got {error_fraction}"
        )));
    }
    if error_fraction == 0.0 {
        return Ok(h.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (h.mean_energy() / 2.0).sqrt();
    let keep = (1.0 - error_fraction * error_fraction).sqrt();
    let data = h
        .data
        .iter()
        .map(|z| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z * keep + Complex64::new(re, im) * (sigma * error_fraction)
        })
        .collect();
    Ok(h.map_data(data))
}

/// Number of subcarriers kept by [`subsample_subcarriers`].
pub fn subsample_count(n_subcarriers: usize, fraction: f64) -> usize {
    // Guard against representation error such as 0.1 * 30 = 3.0000000000000004.
    ((fraction * n_subcarriers as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Keeps a uniformly random subset of `ceil(fraction * n)` subcarriers, in
/// their original order.
pub fn subsample_subcarriers(h: &ChannelTensor, fraction: f64, seed: u64) -> Result<ChannelTensor> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Contract(format!(
            "subcarrier fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let keep = subsample_count(h.n_subcarriers, fraction);
    if keep == 0 {
        return Err(Error::Contract("subcarrier fraction keeps no subcarrier".into()));
    }
    if keep == h.n_subcarriers {
        return Ok(h.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, h.n_subcarriers, keep).into_vec();
    picked.sort_unstable();
    let block = h.n_tx * h.n_users;
    let mut data = Vec::with_capacity(keep * block);
    for &s in &picked {
        data.extend_from_slice(&h.data[s * block..(s + 1) * block]);
    }
    Ok(ChannelTensor {
        n_subcarriers: keep,
        data,
        subcarrier_ids: picked.iter().map(|&s| h.subcarrier_ids[s]).collect(),
        ..h.clone()
    })
}
