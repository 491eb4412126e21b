//! Single-bounce geometric scene.
//!
//! Antennas, users and point scatterers are dropped uniformly over a
//! rectangle, together with axis-aligned rectangular obstacles. Every
//! tx/user link is the sum of
//!
//! - a line-of-sight path, removed when the segment crosses an obstacle, and
//! - one path per scatterer with that scatterer's Rayleigh gain, attenuated
//!   by the pathloss of the total bounce length,
//!
//! each rotated by `exp(-j 2 pi f tau)` for its delay `tau`, and then scaled
//! by a log-normal shadowing factor drawn per link. Pathloss is
//! `lambda / (4 pi) * d^(-eta / 2)` in amplitude with a 1 m reference
//! distance, so nearby antennas see nearly equal delays (spatial
//! correlation) and the delay spread makes the channel frequency selective.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ChannelTensor, SceneConfig, SPEED_OF_LIGHT};
use crate::error::Result;

/// Distances below this are clamped for pathloss and rejected when sampling.
pub const REFERENCE_DISTANCE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Liang-Barsky clip of the segment `a -> b` against the rectangle.
    pub fn intersects_segment(&self, a: &Point, b: &Point) -> bool {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        let edges = [
            (-dx, a.x - self.min.x),
            (dx, self.max.x - a.x),
            (-dy, a.y - self.min.y),
            (dy, self.max.y - a.y),
        ];
        for (p, q) in edges {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Amplitude pathloss at distance `d` metres.
pub fn pathloss_amplitude(d: f64, wavelength: f64, exponent: f64) -> f64 {
    wavelength / (4.0 * PI) * d.max(REFERENCE_DISTANCE).powf(-exponent / 2.0)
}

/// A sampled geometry plus the per-scatterer and per-link random draws.
#[derive(Clone, Debug)]
pub struct Scene {
    pub tx: Vec<Point>,
    pub users: Vec<Point>,
    pub scatterers: Vec<Point>,
    pub scatter_gains: Vec<Complex64>,
    pub obstacles: Vec<Rect>,
    /// Linear amplitude factor per `(tx, user)` link, row-major by tx.
    pub shadowing: Vec<f64>,
}

impl Scene {
    /// Draws a scene; deterministic in `cfg.seed`.
    ///
    /// Points inside an obstacle or closer than the reference distance to an
    /// already placed point of another kind are redrawn.
    pub fn sample(cfg: &SceneConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let uniform_point =
            |rng: &mut ChaCha8Rng| Point::new(rng.random::<f64>() * cfg.width, rng.random::<f64>() * cfg.height);

        let obstacles: Vec<Rect> = (0..cfg.n_obstacles)
            .map(|_| {
                let w = cfg.width * rng.random_range(0.2..0.4);
                let h = cfg.height * rng.random_range(0.2..0.4);
                let x = rng.random::<f64>() * (cfg.width - w);
                let y = rng.random::<f64>() * (cfg.height - h);
                Rect {
                    min: Point::new(x, y),
                    max: Point::new(x + w, y + h),
                }
            })
            .collect();
        let free = |p: &Point, others: &[&[Point]]| {
            !obstacles.iter().any(|o| o.contains(p))
                && others
                    .iter()
                    .all(|set| set.iter().all(|q| q.distance(p) >= REFERENCE_DISTANCE))
        };
        // Obstacles can cover at most 16% of the area, so rejection terminates fast.
        let draw = |rng: &mut ChaCha8Rng, others: &[&[Point]]| loop {
            let p = uniform_point(rng);
            if free(&p, others) {
                break p;
            }
        };

        let mut tx = Vec::with_capacity(cfg.n_tx);
        for _ in 0..cfg.n_tx {
            let p = draw(&mut rng, &[]);
            tx.push(p);
        }
        let mut users = Vec::with_capacity(cfg.n_users);
        for _ in 0..cfg.n_users {
            let p = draw(&mut rng, &[&tx]);
            users.push(p);
        }
        let mut scatterers = Vec::with_capacity(cfg.n_scatterers);
        for _ in 0..cfg.n_scatterers {
            let p = draw(&mut rng, &[&tx, &users]);
            scatterers.push(p);
        }
        let scatter_gains = (0..cfg.n_scatterers).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let shadowing = (0..cfg.n_tx * cfg.n_users)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                10f64.powf(cfg.shadow_sigma_db * x / 20.0)
            })
            .collect();
        Self {
            tx,
            users,
            scatterers,
            scatter_gains,
            obstacles,
            shadowing,
        }
    }

    fn los_blocked(&self, a: &Point, b: &Point) -> bool {
        self.obstacles.iter().any(|o| o.intersects_segment(a, b))
    }

    /// Synthesises the wideband channel of this scene.
    pub fn channel(&self, cfg: &SceneConfig) -> Result<ChannelTensor> {
        let lambda = cfg.wavelength();
        let n_users = self.users.len();
        let n_tx = self.tx.len();
        let freqs: Vec<f64> = (0..cfg.n_subcarriers).map(|n| cfg.subcarrier_freq(n)).collect();
        let mut data = vec![Complex64::new(0.0, 0.0); cfg.n_subcarriers * n_tx * n_users];
        let mut paths: Vec<(Complex64, f64)> = Vec::with_capacity(self.scatterers.len() + 1);
        for (t, tx) in self.tx.iter().enumerate() {
            for (u, user) in self.users.iter().enumerate() {
                paths.clear();
                if !self.los_blocked(tx, user) {
                    let d = tx.distance(user);
                    let amp = pathloss_amplitude(d, lambda, cfg.pathloss_exponent);
                    paths.push((Complex64::new(amp, 0.0), d / SPEED_OF_LIGHT));
                }
                for (s, gain) in self.scatterers.iter().zip(&self.scatter_gains) {
                    let d = tx.distance(s) + s.distance(user);
                    let amp = pathloss_amplitude(d, lambda, cfg.pathloss_exponent);
                    paths.push((gain * amp, d / SPEED_OF_LIGHT));
                }
                let shadow = self.shadowing[t * n_users + u];
                for (f_idx, &freq) in freqs.iter().enumerate() {
                    let mut h = Complex64::new(0.0, 0.0);
                    for &(amp, tau) in &paths {
                        // Reduce the phase modulo one cycle before scaling by 2 pi.
                        let cycles = (freq * tau).fract();
                        h += amp * Complex64::from_polar(1.0, -2.0 * PI * cycles);
                    }
                    data[(f_idx * n_tx + t) * n_users + u] = h * shadow;
                }
            }
        }
        ChannelTensor::new(cfg.n_subcarriers, n_tx, n_users, data)?.with_positions(self.tx.clone(), self.users.clone())
    }
}

fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}
