//! Reference selection algorithms: centralised greedy, random, exhaustive
//! enumeration, and the distributed nearest-neighbour (NN) scheme where each
//! antenna toggles its own membership.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_complex::Complex64;

use crate::channel::{ChannelTensor, Point};
use crate::error::{Error, Result};
use crate::metrics::{CostBasis, FlopLedger};
use crate::numerics::cholesky_log2det;
use crate::objective::{accumulate_outer, finish_user_form, Objective};

pub const GREEDY: &str = "greedy";
pub const NN: &str = "nn";

/// Largest number of subsets [`exhaustive_select`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Sorted set of distinct antenna indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Selection {
    antennas: Vec<usize>,
}

impl Selection {
    pub fn new(mut antennas: Vec<usize>, n_total: usize) -> Result<Self> {
        antennas.sort_unstable();
        if antennas.is_empty() {
            return Err(Error::Contract("a selection needs at least one antenna".into()));
        }
        if antennas.windows(2).any(|w| w[0] == w[1]) || antennas.iter().any(|&a| a >= n_total) {
            return Err(Error::Contract(
                "selection indices must be distinct and in range".into(),
            ));
        }
        Ok(Self { antennas })
    }

    pub fn antennas(&self) -> &[usize] {
        &self.antennas
    }

    pub fn len(&self) -> usize {
        self.antennas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antennas.is_empty()
    }
}

fn check_count(n: usize, n_total: usize) -> Result<()> {
    if n == 0 || n > n_total {
        return Err(Error::Contract(format!("cannot select {n} of {n_total} antennas")));
    }
    Ok(())
}

/// Greedy picks in order plus the ledger total after each round.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTrace {
    pub order: Vec<usize>,
    pub cumulative_flops: Vec<u64>,
}

impl GreedyTrace {
    /// The selection after `n` rounds.
    pub fn prefix(&self, n: usize, n_total: usize) -> Result<Selection> {
        check_count(n, self.order.len())?;
        Selection::new(self.order[..n].to_vec(), n_total)
    }
}

/// Runs `n` greedy rounds. In round `r` every unselected antenna is scored
/// by the objective of the augmented set (`N_TS = r + 1`); the best is
/// added, ties going to the lowest index.
pub fn greedy_trace(objective: &Objective<'_>, n: usize, ledger: &mut FlopLedger) -> Result<GreedyTrace> {
    let h = objective.channel();
    let n_t = h.n_tx();
    check_count(n, n_t)?;
    let n_r = h.n_users();
    let n_sub = h.n_subcarriers();
    let mut chosen = vec![false; n_t];
    let mut order = Vec::with_capacity(n);
    let mut cumulative_flops = Vec::with_capacity(n);
    // Gram sum of the chosen antennas per subcarrier (lower triangle).
    let mut grams = vec![Complex64::new(0.0, 0.0); n_sub * n_r * n_r];
    let mut work = vec![Complex64::new(0.0, 0.0); n_r * n_r];
    let mut small = Vec::new();
    let start = ledger.total();
    for round in 0..n {
        let n_ts = round + 1;
        let c = objective.rho() / n_ts as f64;
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..n_t).filter(|&c| !chosen[c]) {
            ledger.record_objective(GREEDY, "candidate", n_ts, n_r, n_sub);
            let value = if n_ts <= n_r {
                small.clear();
                small.extend_from_slice(&order);
                small.push(cand);
                objective.capacity_scaled(&small, n_ts)
            } else {
                let mut total = 0.0;
                for s in 0..n_sub {
                    work.copy_from_slice(&grams[s * n_r * n_r..(s + 1) * n_r * n_r]);
                    accumulate_outer(&mut work, h.antenna_row(s, cand), n_r);
                    finish_user_form(&mut work, n_r, c);
                    total += cholesky_log2det(&mut work, n_r).expect("I + PSD is positive definite");
                }
                (total / n_sub as f64).max(0.0)
            };
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((cand, value));
            }
        }
        let (pick, _) = best.expect("at least one candidate remains");
        chosen[pick] = true;
        order.push(pick);
        for s in 0..n_sub {
            accumulate_outer(
                &mut grams[s * n_r * n_r..(s + 1) * n_r * n_r],
                h.antenna_row(s, pick),
                n_r,
            );
        }
        cumulative_flops.push(ledger.total() - start);
    }
    Ok(GreedyTrace {
        order,
        cumulative_flops,
    })
}

pub fn greedy_select(objective: &Objective<'_>, n: usize, ledger: &mut FlopLedger) -> Result<Selection> {
    greedy_trace(objective, n, ledger)?.prefix(n, objective.channel().n_tx())
}

/// Uniformly random `n`-subset of `0..n_total`.
pub fn random_select(n_total: usize, n: usize, seed: u64) -> Result<Selection> {
    check_count(n, n_total)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Selection::new(rand::seq::index::sample(&mut rng, n_total, n).into_vec(), n_total)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Best `n`-subset by enumeration; ties keep the lexicographically
/// smallest subset.
pub fn exhaustive_select(objective: &Objective<'_>, n: usize) -> Result<Selection> {
    let n_t = objective.channel().n_tx();
    check_count(n, n_t)?;
    let subsets = binomial(n_t, n);
    if subsets > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            subsets,
            bound: EXHAUSTIVE_LIMIT,
        });
    }
    let mut combo: Vec<usize> = (0..n).collect();
    let mut best = (objective.capacity(&combo), combo.clone());
    // advance to the next combination in lexicographic order
    while let Some(i) = (0..n).rev().find(|&i| combo[i] != i + n_t - n) {
        combo[i] += 1;
        for j in i + 1..n {
            combo[j] = combo[j - 1] + 1;
        }
        let value = objective.capacity(&combo);
        if value > best.0 {
            best = (value, combo.clone());
        }
    }
    Selection::new(best.1, n_t)
}

/// Knobs of the nearest-neighbour baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnConfig {
    pub iterations: usize,
    /// Probability that an antenna starts selected.
    pub initial_probability: f64,
    pub cost_basis: CostBasis,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            initial_probability: 0.5,
            cost_basis: CostBasis::Selected,
        }
    }
}

/// Each antenna's `k` nearest other antennas by distance (ties by index).
/// Without positions, index distance on a ring stands in.
pub fn nearest_neighbours(n_tx: usize, positions: Option<&[Point]>, k: usize) -> Vec<Vec<usize>> {
    let k = k.min(n_tx.saturating_sub(1));
    (0..n_tx)
        .map(|i| {
            let mut others: Vec<usize> = (0..n_tx).filter(|&j| j != i).collect();
            match positions {
                Some(p) => {
                    others.sort_by(|&a, &b| p[i].distance(&p[a]).total_cmp(&p[i].distance(&p[b])).then(a.cmp(&b)))
                }
                None => others.sort_by_key(|&j| {
                    let d = i.abs_diff(j);
                    (d.min(n_tx - d), j)
                }),
            }
            others.truncate(k);
            others.sort_unstable();
            others
        })
        .collect()
}

/// Result of [`nn_select`].
#[derive(Clone, Debug, PartialEq)]
pub struct NnOutcome {
    pub selection: Selection,
    pub capacity: f64,
    /// Iteration (1-based) at which the returned state was reached.
    pub best_iteration: usize,
}

/// Nearest-neighbour distributed selection.
///
/// Every iteration visits the antennas in a seeded random order; each one
/// scores the selected antennas among its neighbours with and without
/// itself and keeps whichever membership scores higher, updating the shared
/// state immediately. After each iteration the full selection is scored and
/// the best state seen is returned. The size of the result is emergent.
pub fn nn_select(
    objective: &Objective<'_>,
    neighbours: &[Vec<usize>],
    cfg: &NnConfig,
    seed: u64,
    ledger: &mut FlopLedger,
) -> Result<NnOutcome> {
    let h: &ChannelTensor = objective.channel();
    let n_t = h.n_tx();
    if cfg.iterations == 0 {
        return Err(Error::Contract("NN needs at least one iteration".into()));
    }
    if neighbours.len() != n_t {
        return Err(Error::Contract(format!(
            "neighbour map covers {} antennas, channel has {n_t}",
            neighbours.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut member: Vec<bool> = (0..n_t).map(|_| rng.random_bool(cfg.initial_probability)).collect();
    let mut order: Vec<usize> = (0..n_t).collect();
    let mut best: Option<(f64, Vec<usize>, usize)> = None;
    let mut local = Vec::with_capacity(n_t);
    for iteration in 1..=cfg.iterations {
        order.shuffle(&mut rng);
        for &i in &order {
            local.clear();
            local.extend(neighbours[i].iter().copied().filter(|&j| member[j]));
            let full = neighbours[i].len() + 1;
            let rows = cfg.cost_basis.rows(local.len(), full - 1);
            let without = objective.capacity_charged(&local, local.len().max(1), rows, ledger, NN, "membership");
            local.push(i);
            let rows = cfg.cost_basis.rows(local.len(), full);
            let with = objective.capacity_charged(&local, local.len(), rows, ledger, NN, "membership");
            member[i] = with > without;
        }
        let selected: Vec<usize> = (0..n_t).filter(|&j| member[j]).collect();
        if selected.is_empty() {
            continue;
        }
        let value = objective.capacity_logged(&selected, selected.len(), ledger, NN, "select");
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, selected, iteration));
        }
    }
    let (capacity, antennas, best_iteration) = match best {
        Some(b) => b,
        None => return Err(Error::Domain("NN never selected an antenna".into())),
    };
    Ok(NnOutcome {
        selection: Selection::new(antennas, n_t)?,
        capacity,
        best_iteration,
    })
}
