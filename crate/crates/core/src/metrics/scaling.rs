//! Flop scaling with array size and the flops-versus-selected-count table.
//!
//! Two slopes are fitted per algorithm: one on the total ledger flops and
//! one on the mean cost of a single per-node computation (an RPN guard
//! evaluation, an NN membership evaluation, a greedy candidate score). The
//! asymptotic bounds `O(N_T^3)` for NN with neighbourhoods of about `N_T`
//! and `O(N_T^{3/2})` for RPN with neighbourhoods of `sqrt(N_T)` describe
//! the latter. They are worst-case bounds, so the template charges local
//! evaluations at neighbourhood size by default ([`CostBasis::Neighbourhood`]);
//! with [`CostBasis::Selected`] the fit follows the sizes the runs reach.

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{self, nearest_neighbours, NnConfig};
use crate::channel::{generate_channel, normalize_channel, ChannelTensor, SceneConfig};
use crate::error::{Error, Result};
use crate::metrics::{CostBasis, FlopLedger};
use crate::numerics::db_to_linear;
use crate::objective::Objective;
use crate::rpn::{self, RpnConfig};
use crate::topology::build_toroid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Algorithm {
    Rpn { k_race: usize },
    Nn { iterations: usize },
    Greedy,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rpn { .. } => rpn::ALGORITHM,
            Algorithm::Nn { .. } => baselines::NN,
            Algorithm::Greedy => baselines::GREEDY,
        }
    }

    /// Ledger phase holding this algorithm's per-node computations.
    pub fn node_phase(&self) -> &'static str {
        match self {
            Algorithm::Rpn { .. } => "guard",
            Algorithm::Nn { .. } => "membership",
            Algorithm::Greedy => "candidate",
        }
    }
}

/// Toroid `(rows, cols)` whose neighbourhoods hold `sqrt(n_t)` places:
/// `rows = sqrt(n_t) / 2`, `cols = 2 sqrt(n_t)`.
pub fn toroid_shape_for(n_t: usize) -> Result<(usize, usize)> {
    let s = (n_t as f64).sqrt().round() as usize;
    if s * s != n_t || !s.is_multiple_of(2) || s < 4 {
        return Err(Error::Config(format!(
            "no toroid with sqrt(N_T)-sized neighbourhoods for N_T = {n_t}; use an even square of at least 16"
        )));
    }
    Ok((s / 2, 2 * s))
}

/// Scene and workload used at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingTemplate {
    /// `n_tx` and `seed` are overwritten per point.
    pub scene: SceneConfig,
    pub rho_db: f64,
    /// Selected antennas as a fraction of `N_T` (RPN tokens, greedy rounds).
    pub selected_fraction: f64,
    /// NN neighbourhood size; `None` means every other antenna.
    pub nn_neighbours: Option<usize>,
    pub cost_basis: CostBasis,
}

impl Default for ScalingTemplate {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                n_users: 4,
                n_subcarriers: 4,
                ..SceneConfig::default()
            },
            rho_db: -5.0,
            selected_fraction: 0.25,
            nn_neighbours: None,
            cost_basis: CostBasis::Neighbourhood,
        }
    }
}

impl ScalingTemplate {
    pub fn selected_for(&self, n_t: usize) -> usize {
        ((n_t as f64 * self.selected_fraction).round() as usize).clamp(1, n_t)
    }

    pub fn channel(&self, n_t: usize, seed: u64) -> Result<ChannelTensor> {
        let cfg = SceneConfig {
            n_tx: n_t,
            seed,
            ..self.scene.clone()
        };
        normalize_channel(&generate_channel(&cfg)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n_t: usize,
    /// Mean over seeds.
    pub total_flops: f64,
    /// Mean over seeds.
    pub node_evaluations: f64,
    pub flops_per_node_evaluation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub algorithm: String,
    pub points: Vec<ScalingPoint>,
    pub slope_total: f64,
    pub slope_per_node: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Contract("a slope fit needs at least three points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Scaling measurement for an arbitrary workload. `run(n_t, seed, ledger)`
/// must charge its work to `ledger` under `algorithm`; per-node counts are
/// read from `node_phase`.
pub fn measure_scaling_with<F>(
    algorithm: &str,
    node_phase: &str,
    grid: &[usize],
    seeds: &[u64],
    run: F,
) -> Result<ScalingReport>
where
    F: Fn(usize, u64, &mut FlopLedger) -> Result<()> + Sync,
{
    if grid.len() < 3 {
        return Err(Error::Config("scaling grid needs at least three sizes".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("scaling needs at least one seed".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &n_t in grid {
        let ledgers: Vec<Result<FlopLedger>> = seeds
            .par_iter()
            .map(|&seed| {
                let mut ledger = FlopLedger::new();
                run(n_t, seed, &mut ledger)?;
                Ok(ledger)
            })
            .collect();
        let mut merged = FlopLedger::new();
        for l in ledgers {
            merged.merge(&l?);
        }
        let k = seeds.len() as f64;
        let node = merged.get(algorithm, node_phase);
        let node_flops = node.map_or(0, |e| e.flops) as f64;
        let node_evals = node.map_or(0, |e| e.evaluations) as f64;
        points.push(ScalingPoint {
            n_t,
            total_flops: merged.total_for(algorithm) as f64 / k,
            node_evaluations: node_evals / k,
            flops_per_node_evaluation: if node_evals > 0.0 { node_flops / node_evals } else { 0.0 },
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n_t as f64).collect();
    let totals: Vec<f64> = points.iter().map(|p| p.total_flops).collect();
    let per_node: Vec<f64> = points.iter().map(|p| p.flops_per_node_evaluation).collect();
    Ok(ScalingReport {
        algorithm: algorithm.to_string(),
        slope_total: fit_loglog_slope(&xs, &totals)?,
        slope_per_node: fit_loglog_slope(&xs, &per_node)?,
        points,
    })
}

/// Runs `algorithm` over a grid of array sizes. RPN uses the toroid from
/// [`toroid_shape_for`], so its neighbourhoods hold `sqrt(N_T)` places.
pub fn measure_scaling(
    algorithm: Algorithm,
    grid: &[usize],
    template: &ScalingTemplate,
    seeds: &[u64],
) -> Result<ScalingReport> {
    if matches!(algorithm, Algorithm::Rpn { .. }) {
        for &n_t in grid {
            toroid_shape_for(n_t)?;
        }
    }
    let rho = db_to_linear(template.rho_db);
    measure_scaling_with(
        algorithm.name(),
        algorithm.node_phase(),
        grid,
        seeds,
        |n_t, seed, ledger| {
            let h = template.channel(n_t, seed)?;
            let objective = Objective::new(&h, rho)?;
            let n_sel = template.selected_for(n_t);
            match algorithm {
                Algorithm::Rpn { k_race } => {
                    let (rows, cols) = toroid_shape_for(n_t)?;
                    let topology = build_toroid(rows, cols)?;
                    let seeds: Vec<u64> = (0..k_race as u64)
                        .map(|i| seed.wrapping_mul(1000).wrapping_add(i))
                        .collect();
                    let cfg = RpnConfig {
                        cost_basis: template.cost_basis,
                        ..RpnConfig::default()
                    };
                    rpn::race(&topology, &objective, &cfg, n_sel, &seeds, ledger)?;
                }
                Algorithm::Nn { iterations } => {
                    let k = template.nn_neighbours.unwrap_or(n_t - 1);
                    let nbrs = nearest_neighbours(n_t, h.tx_positions(), k);
                    let cfg = NnConfig {
                        iterations,
                        cost_basis: template.cost_basis,
                        ..NnConfig::default()
                    };
                    baselines::nn_select(&objective, &nbrs, &cfg, seed, ledger)?;
                }
                Algorithm::Greedy => {
                    baselines::greedy_select(&objective, n_sel, ledger)?;
                }
            }
            Ok(())
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlopsRow {
    pub n_selected: usize,
    pub rpn_flops: f64,
    pub nn_flops: f64,
    pub greedy_flops: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlopsComparison {
    pub n_tx: usize,
    pub n_users: usize,
    pub rows: Vec<FlopsRow>,
    /// Mean size of the NN selection (NN cannot be told how many to pick).
    pub nn_selected_mean: f64,
}

/// Per seed: `(rpn, greedy)` flops per count, NN flops and NN size.
type SeedCells = (Vec<(u64, u64)>, u64, usize);

/// Flops spent by each algorithm to pick `n` of the scene's antennas, for
/// every `n` in `n_grid`, averaged over `seeds`. The scene's `n_tx` must
/// factor as `rows x cols`.
#[allow(clippy::too_many_arguments)]
pub fn compare_flops(
    scene: &SceneConfig,
    rows: usize,
    cols: usize,
    rho_db: f64,
    n_grid: &[usize],
    seeds: &[u64],
    k_race: usize,
    nn_iterations: usize,
    cost_basis: CostBasis,
) -> Result<FlopsComparison> {
    if rows * cols != scene.n_tx {
        return Err(Error::Config(format!(
            "{rows}x{cols} toroid does not hold {} antennas",
            scene.n_tx
        )));
    }
    if n_grid.iter().any(|&n| n == 0 || n > scene.n_tx) || seeds.is_empty() {
        return Err(Error::Config(
            "selected counts must lie in 1..=n_tx and seeds be non-empty".into(),
        ));
    }
    let topology = build_toroid(rows, cols)?;
    let rho = db_to_linear(rho_db);
    let max_n = *n_grid.iter().max().unwrap_or(&1);
    let rpn_cfg = RpnConfig {
        cost_basis,
        ..RpnConfig::default()
    };
    let per_seed: Vec<Result<SeedCells>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SceneConfig { seed, ..scene.clone() };
            let h = normalize_channel(&generate_channel(&cfg)?)?;
            let objective = Objective::new(&h, rho)?;
            let greedy = baselines::greedy_trace(&objective, max_n, &mut FlopLedger::new())?;
            let mut cells = Vec::with_capacity(n_grid.len());
            for &n in n_grid {
                let mut ledger = FlopLedger::new();
                let race_seeds: Vec<u64> = (0..k_race as u64)
                    .map(|i| seed.wrapping_mul(1000).wrapping_add(i))
                    .collect();
                rpn::race(&topology, &objective, &rpn_cfg, n, &race_seeds, &mut ledger)?;
                cells.push((ledger.total(), greedy.cumulative_flops[n - 1]));
            }
            let nbrs = nearest_neighbours(h.n_tx(), h.tx_positions(), h.n_tx() - 1);
            let mut nn_ledger = FlopLedger::new();
            let cfg = NnConfig {
                iterations: nn_iterations,
                cost_basis,
                ..NnConfig::default()
            };
            let nn = baselines::nn_select(&objective, &nbrs, &cfg, seed, &mut nn_ledger)?;
            Ok((cells, nn_ledger.total(), nn.selection.len()))
        })
        .collect();
    let mut rows_out: Vec<FlopsRow> = n_grid
        .iter()
        .map(|&n| FlopsRow {
            n_selected: n,
            rpn_flops: 0.0,
            nn_flops: 0.0,
            greedy_flops: 0.0,
        })
        .collect();
    let mut nn_selected = 0.0;
    let k = seeds.len() as f64;
    for result in per_seed {
        let (cells, nn_flops, nn_size) = result?;
        for (row, (rpn_f, greedy_f)) in rows_out.iter_mut().zip(cells) {
            row.rpn_flops += rpn_f as f64 / k;
            row.greedy_flops += greedy_f as f64 / k;
            row.nn_flops += nn_flops as f64 / k;
        }
        nn_selected += nn_size as f64 / k;
    }
    Ok(FlopsComparison {
        n_tx: scene.n_tx,
        n_users: scene.n_users,
        rows: rows_out,
        nn_selected_mean: nn_selected,
    })
}
