use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmKind, ExperimentConfig, PlaceMapping};
use crate::baselines::{self, binomial, nearest_neighbours, NnConfig};
use crate::channel::{
    generate_channel, normalize_channel, perturb_csi, subsample_subcarriers, ChannelTensor, SceneConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{
    compare_flops, flops_objective, measure_scaling, Algorithm, FlopLedger, FlopsComparison, ScalingReport,
    ScalingTemplate,
};
use crate::numerics::db_to_linear;
use crate::objective::{zf_waterfilled_rate, Objective};
use crate::rpn::{self, RpnConfig};
use crate::topology::{build_toroid_with, spatial_toroid_mapping, RpnTopology};

/// One algorithm's outcome at one grid point and seed.
///
/// Both rates are in bit/s/Hz averaged over subcarriers and are always
/// computed on the true, full channel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub algorithm: String,
    pub seed: u64,
    pub n_users: usize,
    pub n_selected: usize,
    pub csi_error: f64,
    pub subcarrier_fraction: f64,
    /// Uniform-power log-det capacity.
    pub capacity: f64,
    /// Zero-forcing sum rate with water-filled power.
    pub zf_rate: f64,
    /// False when some subcarrier's selection cannot separate the users.
    pub zf_feasible: bool,
    /// Passes for RPN, iterations for NN, zero otherwise.
    pub passes: f64,
    pub flops: u64,
    pub converged: bool,
}

impl ResultRecord {
    fn sort_key(&self) -> (usize, u64, u64, usize, &str, u64) {
        (
            self.n_users,
            self.csi_error.to_bits(),
            self.subcarrier_fraction.to_bits(),
            self.n_selected,
            self.algorithm.as_str(),
            self.seed,
        )
    }
}

fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for a sub-task, derived from its coordinates.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |acc, &p| splitmix(acc ^ splitmix(p)))
}

const TAG_RANDOM: u64 = 1;
const TAG_RACE: u64 = 2;
const TAG_NN: u64 = 3;
const TAG_CSI: u64 = 4;
const TAG_SUBCARRIERS: u64 = 5;

/// The normalised channel for one seed and user count.
pub fn instance_channel(cfg: &ExperimentConfig, seed: u64, n_users: usize) -> Result<ChannelTensor> {
    let scene = SceneConfig {
        n_users,
        seed,
        ..cfg.scene.clone()
    };
    normalize_channel(&generate_channel(&scene)?)
}

fn instance_topology(cfg: &ExperimentConfig, h: &ChannelTensor) -> Result<RpnTopology> {
    let t = build_toroid_with(cfg.toroid_rows, cfg.toroid_cols, cfg.edge_rule)?;
    match cfg.mapping {
        PlaceMapping::Index => Ok(t),
        PlaceMapping::Spatial => {
            let positions = h
                .tx_positions()
                .ok_or_else(|| Error::Config("spatial mapping needs antenna positions".into()))?;
            t.with_mapping(spatial_toroid_mapping(positions, cfg.toroid_rows, cfg.toroid_cols)?)
        }
    }
}

struct Instance<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    n_users: usize,
    csi_error: f64,
    subcarrier_fraction: f64,
    rho: f64,
    topology: &'a RpnTopology,
    truth: &'a ChannelTensor,
}

impl Instance<'_> {
    fn record(&self, algorithm: &str, antennas: &[usize], flops: u64, passes: f64, converged: bool) -> ResultRecord {
        let truth = Objective::new(self.truth, self.rho).expect("rho validated");
        let (zf_rate, zf_feasible) = zf_waterfilled_rate(self.truth, antennas, self.rho);
        ResultRecord {
            algorithm: algorithm.to_string(),
            seed: self.seed,
            n_users: self.n_users,
            n_selected: antennas.len(),
            csi_error: self.csi_error,
            subcarrier_fraction: self.subcarrier_fraction,
            capacity: truth.capacity(antennas),
            zf_rate,
            zf_feasible,
            passes,
            flops,
            converged,
        }
    }

    /// Runs every configured algorithm with decisions made on `decide`.
    fn run(&self, decide: &ChannelTensor) -> Result<Vec<ResultRecord>> {
        let cfg = self.cfg;
        let objective = Objective::new(decide, self.rho)?;
        let n_tx = decide.n_tx();
        let tokens = cfg.tokens_for(self.n_users);
        let mut algorithms = cfg.algorithms.clone();
        algorithms.sort_unstable();
        algorithms.dedup();
        let mut out = Vec::new();
        for algorithm in algorithms {
            match algorithm {
                AlgorithmKind::Random => {
                    for &t in &tokens {
                        let seed = derive_seed(&[TAG_RANDOM, self.seed, self.n_users as u64, t as u64]);
                        let sel = baselines::random_select(n_tx, t, seed)?;
                        out.push(self.record("random", sel.antennas(), 0, 0.0, true));
                    }
                }
                AlgorithmKind::Greedy => {
                    let max_t = tokens.iter().copied().max().unwrap_or(0);
                    let trace = baselines::greedy_trace(&objective, max_t, &mut FlopLedger::new())?;
                    for &t in &tokens {
                        let sel = trace.prefix(t, n_tx)?;
                        out.push(self.record("greedy", sel.antennas(), trace.cumulative_flops[t - 1], 0.0, true));
                    }
                }
                AlgorithmKind::Rpn => {
                    let rpn_cfg = RpnConfig {
                        scaling: cfg.guard_scaling,
                        max_passes: cfg.max_passes,
                        cost_basis: cfg.cost_basis,
                        ..RpnConfig::default()
                    };
                    let k = cfg.k_race_for(self.n_users);
                    for &t in &tokens {
                        let seeds: Vec<u64> = (0..k as u64)
                            .map(|i| derive_seed(&[TAG_RACE, self.seed, self.n_users as u64, t as u64, i]))
                            .collect();
                        let mut ledger = FlopLedger::new();
                        let race = rpn::race(self.topology, &objective, &rpn_cfg, t, &seeds, &mut ledger)?;
                        let flops = ledger.total();
                        let best = &race.stats[race.best_index];
                        out.push(self.record(
                            "rpn_best",
                            &race.best.selected_antennas(),
                            flops,
                            best.passes as f64,
                            best.converged,
                        ));
                        let members: Vec<ResultRecord> = race
                            .finals
                            .iter()
                            .zip(&race.stats)
                            .map(|(state, s)| {
                                self.record(
                                    "rpn_mean",
                                    &state.selected_antennas(),
                                    flops,
                                    s.passes as f64,
                                    s.converged,
                                )
                            })
                            .collect();
                        out.push(average(&members));
                    }
                }
                AlgorithmKind::Nn => {
                    let k = cfg.nn_neighbours.unwrap_or(n_tx - 1);
                    let nbrs = nearest_neighbours(n_tx, decide.tx_positions(), k);
                    let nn_cfg = NnConfig {
                        iterations: cfg.nn_iterations,
                        cost_basis: cfg.cost_basis,
                        ..NnConfig::default()
                    };
                    let seed = derive_seed(&[TAG_NN, self.seed, self.n_users as u64]);
                    let mut ledger = FlopLedger::new();
                    let nn = baselines::nn_select(&objective, &nbrs, &nn_cfg, seed, &mut ledger)?;
                    out.push(self.record(
                        "nn",
                        nn.selection.antennas(),
                        ledger.total(),
                        cfg.nn_iterations as f64,
                        true,
                    ));
                }
                AlgorithmKind::Exhaustive => {
                    for &t in &tokens {
                        let sel = baselines::exhaustive_select(&objective, t)?;
                        let evaluations = binomial(n_tx, t) as u64;
                        let flops = evaluations * flops_objective(t, decide.n_users(), decide.n_subcarriers());
                        out.push(self.record("exhaustive", sel.antennas(), flops, 0.0, true));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Mean of race members' records; flags are AND-ed.
fn average(members: &[ResultRecord]) -> ResultRecord {
    let k = members.len() as f64;
    let mut out = members[0].clone();
    out.capacity = members.iter().map(|r| r.capacity).sum::<f64>() / k;
    out.zf_rate = members.iter().map(|r| r.zf_rate).sum::<f64>() / k;
    out.passes = members.iter().map(|r| r.passes).sum::<f64>() / k;
    out.zf_feasible = members.iter().all(|r| r.zf_feasible);
    out.converged = members.iter().all(|r| r.converged);
    out
}

fn grid(cfg: &ExperimentConfig) -> Vec<(u64, usize)> {
    cfg.seeds
        .iter()
        .flat_map(|&seed| cfg.users.iter().map(move |&u| (seed, u)))
        .filter(|&(_, u)| !cfg.tokens_for(u).is_empty())
        .collect()
}

/// Sum rates of every configured algorithm with perfect CSI.
pub fn run_sumrate_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let rho = db_to_linear(cfg.rho_db);
    let chunks: Vec<Result<Vec<ResultRecord>>> = grid(cfg)
        .into_par_iter()
        .map(|(seed, n_users)| {
            let truth = instance_channel(cfg, seed, n_users)?;
            let topology = instance_topology(cfg, &truth)?;
            Instance {
                cfg,
                seed,
                n_users,
                csi_error: 0.0,
                subcarrier_fraction: 1.0,
                rho,
                topology: &topology,
                truth: &truth,
            }
            .run(&truth)
        })
        .collect();
    collect(chunks)
}

/// `(csi_error, subcarrier_fraction)` pairs: the error sweep with every
/// subcarrier, then the subcarrier sweep with perfect CSI.
pub fn csi_conditions(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = cfg.csi_errors.iter().map(|&e| (e, 1.0)).collect();
    out.extend(cfg.subcarrier_fractions.iter().map(|&f| (0.0, f)));
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup();
    out
}

/// Selection on perturbed or subsampled CSI, rates on the true channel.
pub fn run_csi_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    if cfg.csi_errors.is_empty() && cfg.subcarrier_fractions.is_empty() {
        return Err(Error::Config(
            "csi experiment needs csi_errors or subcarrier_fractions".into(),
        ));
    }
    let rho = db_to_linear(cfg.rho_db);
    let conditions = csi_conditions(cfg);
    let chunks: Vec<Result<Vec<ResultRecord>>> = grid(cfg)
        .into_par_iter()
        .map(|(seed, n_users)| {
            let truth = instance_channel(cfg, seed, n_users)?;
            let topology = instance_topology(cfg, &truth)?;
            let mut out = Vec::new();
            for &(csi_error, subcarrier_fraction) in &conditions {
                let noisy = perturb_csi(&truth, csi_error, derive_seed(&[TAG_CSI, seed, n_users as u64]))?;
                let decide = subsample_subcarriers(
                    &noisy,
                    subcarrier_fraction,
                    derive_seed(&[TAG_SUBCARRIERS, seed, n_users as u64]),
                )?;
                let instance = Instance {
                    cfg,
                    seed,
                    n_users,
                    csi_error,
                    subcarrier_fraction,
                    rho,
                    topology: &topology,
                    truth: &truth,
                };
                out.extend(instance.run(&decide)?);
            }
            Ok(out)
        })
        .collect();
    collect(chunks)
}

fn collect(chunks: Vec<Result<Vec<ResultRecord>>>) -> Result<Vec<ResultRecord>> {
    let mut records = Vec::new();
    for chunk in chunks {
        records.extend(chunk?);
    }
    sort_records(&mut records);
    Ok(records)
}

/// Seed-averaged view of a record set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub n_users: usize,
    pub n_selected: usize,
    pub csi_error: f64,
    pub subcarrier_fraction: f64,
    pub n_seeds: usize,
    pub capacity_mean: f64,
    pub zf_rate_mean: f64,
    pub flops_mean: f64,
}

/// Averages records over seeds, grouping by everything else. NN records
/// are grouped without their emergent selection size, which is averaged.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, u64, u64, usize, String), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let n = if r.algorithm == "nn" { 0 } else { r.n_selected };
        groups
            .entry((
                r.n_users,
                r.csi_error.to_bits(),
                r.subcarrier_fraction.to_bits(),
                n,
                r.algorithm.clone(),
            ))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            let mean = |f: &dyn Fn(&ResultRecord) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / k;
            SummaryRow {
                algorithm: g[0].algorithm.clone(),
                n_users: g[0].n_users,
                n_selected: mean(&|r| r.n_selected as f64).round() as usize,
                csi_error: g[0].csi_error,
                subcarrier_fraction: g[0].subcarrier_fraction,
                n_seeds: g.len(),
                capacity_mean: mean(&|r| r.capacity),
                zf_rate_mean: mean(&|r| r.zf_rate),
                flops_mean: mean(&|r| r.flops as f64),
            }
        })
        .collect()
}

/// Flop table at the configured array size plus the scaling fits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlopsReport {
    pub comparison: FlopsComparison,
    pub scaling: Vec<ScalingReport>,
}

pub fn run_flops_experiment(cfg: &ExperimentConfig) -> Result<FlopsReport> {
    cfg.validate()?;
    let f = &cfg.flops;
    if f.scaling_seeds == 0 || f.scaling_grid.len() < 2 {
        return Err(Error::Config(
            "scaling needs at least one seed and two array sizes".into(),
        ));
    }
    let n_users = cfg.users.iter().copied().max().unwrap_or(1);
    let scene = SceneConfig {
        n_users,
        ..cfg.scene.clone()
    };
    let k_race = cfg.k_race.unwrap_or(5);
    let comparison = compare_flops(
        &scene,
        cfg.toroid_rows,
        cfg.toroid_cols,
        cfg.rho_db,
        &f.n_grid,
        &cfg.seeds,
        k_race,
        f.nn_iterations,
        cfg.cost_basis,
    )?;
    let template = ScalingTemplate {
        scene: SceneConfig {
            n_users: f.scaling_users,
            n_subcarriers: f.scaling_subcarriers,
            ..cfg.scene.clone()
        },
        rho_db: cfg.rho_db,
        selected_fraction: f.scaling_selected_fraction,
        nn_neighbours: cfg.nn_neighbours,
        cost_basis: f.scaling_cost_basis,
    };
    let seeds: Vec<u64> = cfg.seeds.iter().copied().take(f.scaling_seeds).collect();
    let scaling = [
        Algorithm::Rpn { k_race },
        Algorithm::Nn {
            iterations: f.nn_iterations,
        },
        Algorithm::Greedy,
    ]
    .iter()
    .map(|&a| measure_scaling(a, &f.scaling_grid, &template, &seeds))
    .collect::<Result<Vec<_>>>()?;
    Ok(FlopsReport { comparison, scaling })
}
