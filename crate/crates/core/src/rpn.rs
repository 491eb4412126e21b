//! Token engine for distributed antenna selection.
//!
//! A marking puts at most one token on each place; a token means the
//! place's antenna is switched on. A token at `from` may move to an empty
//! adjacent place `to` when doing so raises the sum capacity of the antennas
//! holding tokens inside the neighbourhood governing `from -> to`. Among
//! several such moves from one place the largest gain wins (ties go to the
//! lowest destination id).
//!
//! Execution is asynchronous: each pass visits the places in a freshly
//! shuffled order and lets every token-holding place fire at most once,
//! always against the current marking. A pass in which nothing fires is a
//! fixpoint. Moves only relocate tokens, so the token count never changes,
//! and the recorded firing trace can be replayed backwards to recover the
//! starting marking.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{CostBasis, FlopLedger};
use crate::objective::Objective;
use crate::topology::{PlaceId, RpnTopology};

/// Ledger name for this algorithm.
pub const ALGORITHM: &str = "rpn";

/// How `N_TS` is chosen when a guard scores a neighbourhood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardScaling {
    /// Tokens inside the neighbourhood.
    #[default]
    Local,
    /// Tokens in the whole net.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RpnConfig {
    pub scaling: GuardScaling,
    pub max_passes: usize,
    /// A move fires only when its gain exceeds this.
    pub tolerance: f64,
    pub cost_basis: CostBasis,
}

impl Default for RpnConfig {
    fn default() -> Self {
        Self {
            scaling: GuardScaling::Local,
            max_passes: 20,
            tolerance: 1e-12,
            cost_basis: CostBasis::Selected,
        }
    }
}

/// Token marking over a topology.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionState<'t> {
    topology: &'t RpnTopology,
    tokens: Vec<bool>,
    token_count: usize,
}

impl<'t> SelectionState<'t> {
    pub fn from_places(topology: &'t RpnTopology, places: &[PlaceId]) -> Result<Self> {
        let mut tokens = vec![false; topology.n_places];
        for &p in places {
            if p >= topology.n_places || tokens[p] {
                return Err(Error::Contract(format!("invalid or repeated token place {p}")));
            }
            tokens[p] = true;
        }
        if places.is_empty() {
            return Err(Error::Contract("a marking needs at least one token".into()));
        }
        Ok(Self {
            topology,
            tokens,
            token_count: places.len(),
        })
    }

    pub fn topology(&self) -> &'t RpnTopology {
        self.topology
    }

    pub fn has_token(&self, place: PlaceId) -> bool {
        self.tokens[place]
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn marking(&self) -> &[bool] {
        &self.tokens
    }

    pub fn token_places(&self) -> Vec<PlaceId> {
        (0..self.tokens.len()).filter(|&p| self.tokens[p]).collect()
    }

    /// Antennas of the token places, ascending.
    pub fn selected_antennas(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self
            .token_places()
            .into_iter()
            .map(|p| self.topology.antenna(p))
            .collect();
        a.sort_unstable();
        a
    }

    fn move_token(&mut self, from: PlaceId, to: PlaceId) {
        debug_assert!(self.tokens[from] && !self.tokens[to]);
        self.tokens[from] = false;
        self.tokens[to] = true;
    }
}

/// Uniformly random marking with `n_tokens` tokens.
pub fn init_state(topology: &RpnTopology, n_tokens: usize, seed: u64) -> Result<SelectionState<'_>> {
    if n_tokens == 0 || n_tokens > topology.n_places {
        return Err(Error::Contract(format!(
            "token count {n_tokens} outside 1..={}",
            topology.n_places
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let places = rand::seq::index::sample(&mut rng, topology.n_places, n_tokens).into_vec();
    SelectionState::from_places(topology, &places)
}

/// A candidate token move and its neighbourhood capacities.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub from: PlaceId,
    pub to: PlaceId,
    pub neighbourhood: Vec<PlaceId>,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

/// One fired move.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiringRecord {
    pub pass: usize,
    pub from: PlaceId,
    pub to: PlaceId,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    /// Passes made, including the final quiet one when converged.
    pub passes: usize,
    pub firings: usize,
    pub initial_capacity: f64,
    pub final_capacity: f64,
    pub flops: u64,
    pub converged: bool,
    pub trace: Vec<FiringRecord>,
}

fn check_dims(state: &SelectionState<'_>, objective: &Objective<'_>) -> Result<()> {
    if objective.channel().n_tx() != state.topology.n_places {
        return Err(Error::Contract(format!(
            "channel has {} antennas but the topology has {} places",
            objective.channel().n_tx(),
            state.topology.n_places
        )));
    }
    Ok(())
}

/// Antennas holding tokens in `nbhd`, with `moved` optionally relocating one token.
fn nbhd_antennas(state: &SelectionState<'_>, nbhd: &[PlaceId], moved: Option<(PlaceId, PlaceId)>) -> Vec<usize> {
    nbhd.iter()
        .copied()
        .filter(|&p| match moved {
            Some((from, _)) if p == from => false,
            Some((_, to)) if p == to => true,
            _ => state.tokens[p],
        })
        .map(|p| state.topology.antenna(p))
        .collect()
}

fn scaling_count(cfg: &RpnConfig, state: &SelectionState<'_>, local: usize) -> usize {
    match cfg.scaling {
        GuardScaling::Local => local.max(1),
        GuardScaling::Global => state.token_count,
    }
}

/// Neighbourhood capacity before and after moving the token `from -> to`.
pub fn guard_capacities(
    state: &SelectionState<'_>,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
    from: PlaceId,
    to: PlaceId,
) -> Result<(f64, f64)> {
    let nbhd = state
        .topology
        .neighbourhood(from, to)
        .ok_or_else(|| Error::Contract(format!("({from}, {to}) is not an edge")))?;
    let before = nbhd_antennas(state, nbhd, None);
    let after = nbhd_antennas(state, nbhd, Some((from, to)));
    let n_ts = scaling_count(cfg, state, before.len());
    Ok((
        objective.capacity_scaled(&before, n_ts),
        objective.capacity_scaled(&after, n_ts),
    ))
}

/// Every move whose guard holds in the current marking.
pub fn enabled_transitions(
    state: &SelectionState<'_>,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
) -> Result<Vec<Transition>> {
    check_dims(state, objective)?;
    let mut out = Vec::new();
    for &(a, b) in &state.topology.edges {
        let (from, to) = match (state.tokens[a], state.tokens[b]) {
            (true, false) => (a, b),
            (false, true) => (b, a),
            _ => continue,
        };
        let (before, after) = guard_capacities(state, objective, cfg, from, to)?;
        let delta = after - before;
        if delta > cfg.tolerance {
            out.push(Transition {
                from,
                to,
                neighbourhood: state.topology.neighbourhood(from, to).unwrap().to_vec(),
                before,
                after,
                delta,
            });
        }
    }
    Ok(out)
}

/// Outcome of one scheduling pass.
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Fired(Vec<FiringRecord>),
    Fixpoint,
}

/// Best enabled move out of `place`, charging guard evaluations to `ledger`.
fn best_move(
    state: &SelectionState<'_>,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
    place: PlaceId,
    ledger: &mut FlopLedger,
) -> Option<(PlaceId, f64)> {
    let topology = state.topology;
    // Edges sharing a neighbourhood share the "before" capacity.
    let mut before_cache: Vec<(&[PlaceId], f64)> = Vec::with_capacity(2);
    let mut best: Option<(PlaceId, f64)> = None;
    for to in topology.neighbours(place) {
        if state.tokens[to] {
            continue;
        }
        let nbhd = topology.neighbourhood(place, to).expect("validated topology");
        let before_antennas = nbhd_antennas(state, nbhd, None);
        let n_ts = scaling_count(cfg, state, before_antennas.len());
        let rows = cfg.cost_basis.rows(before_antennas.len(), nbhd.len());
        let before = match before_cache.iter().find(|(n, _)| *n == nbhd) {
            Some(&(_, c)) => c,
            None => {
                let c = objective.capacity_charged(&before_antennas, n_ts, rows, ledger, ALGORITHM, "guard");
                before_cache.push((nbhd, c));
                c
            }
        };
        let after_antennas = nbhd_antennas(state, nbhd, Some((place, to)));
        let after = objective.capacity_charged(&after_antennas, n_ts, rows, ledger, ALGORITHM, "guard");
        let delta = after - before;
        if delta > cfg.tolerance && best.is_none_or(|(_, d)| delta > d) {
            best = Some((to, delta));
        }
    }
    best
}

/// One asynchronous pass over all places in a random order.
pub fn step(
    state: &mut SelectionState<'_>,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
    rng: &mut impl Rng,
    pass: usize,
    ledger: &mut FlopLedger,
) -> Result<StepOutcome> {
    check_dims(state, objective)?;
    let mut order: Vec<PlaceId> = (0..state.topology.n_places).collect();
    order.shuffle(rng);
    let mut fired = Vec::new();
    for place in order {
        if !state.tokens[place] {
            continue;
        }
        if let Some((to, delta)) = best_move(state, objective, cfg, place, ledger) {
            state.move_token(place, to);
            fired.push(FiringRecord {
                pass,
                from: place,
                to,
                delta,
            });
        }
    }
    Ok(if fired.is_empty() {
        StepOutcome::Fixpoint
    } else {
        StepOutcome::Fired(fired)
    })
}

/// Runs passes until a fixpoint or `cfg.max_passes`.
pub fn run_to_fixpoint<'t>(
    mut state: SelectionState<'t>,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
    rng: &mut impl Rng,
    ledger: &mut FlopLedger,
) -> Result<(SelectionState<'t>, RunStats)> {
    if cfg.max_passes == 0 {
        return Err(Error::Contract("max_passes must be at least 1".into()));
    }
    check_dims(&state, objective)?;
    let start_flops = ledger.total();
    let initial_capacity = objective.capacity(&state.selected_antennas());
    let mut trace = Vec::new();
    let mut passes = 0;
    let mut converged = false;
    while passes < cfg.max_passes {
        passes += 1;
        match step(&mut state, objective, cfg, rng, passes, ledger)? {
            StepOutcome::Fixpoint => {
                converged = true;
                break;
            }
            StepOutcome::Fired(records) => trace.extend(records),
        }
    }
    let selected = state.selected_antennas();
    let final_capacity = objective.capacity_logged(&selected, selected.len(), ledger, ALGORITHM, "select");
    let stats = RunStats {
        passes,
        firings: trace.len(),
        initial_capacity,
        final_capacity,
        flops: ledger.total() - start_flops,
        converged,
        trace,
    };
    Ok((state, stats))
}

/// A single seeded run: random marking, then passes to a fixpoint.
pub fn run_seeded<'t>(
    topology: &'t RpnTopology,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
    n_tokens: usize,
    seed: u64,
    ledger: &mut FlopLedger,
) -> Result<(SelectionState<'t>, SelectionState<'t>, RunStats)> {
    let initial = init_state(topology, n_tokens, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (state, stats) = run_to_fixpoint(initial.clone(), objective, cfg, &mut rng, ledger)?;
    Ok((initial, state, stats))
}

#[derive(Clone, Debug)]
pub struct RaceResult<'t> {
    pub best: SelectionState<'t>,
    pub best_index: usize,
    pub finals: Vec<SelectionState<'t>>,
    pub stats: Vec<RunStats>,
}

impl RaceResult<'_> {
    pub fn mean_final_capacity(&self) -> f64 {
        self.stats.iter().map(|s| s.final_capacity).sum::<f64>() / self.stats.len() as f64
    }
}

/// Runs one independent net per seed and keeps the best final selection.
///
/// Runs are executed in parallel; each is a pure function of its seed, and
/// ledgers are merged in seed order, so the result does not depend on the
/// thread count.
pub fn race<'t>(
    topology: &'t RpnTopology,
    objective: &Objective<'_>,
    cfg: &RpnConfig,
    n_tokens: usize,
    seeds: &[u64],
    ledger: &mut FlopLedger,
) -> Result<RaceResult<'t>> {
    if seeds.is_empty() {
        return Err(Error::Contract("a race needs at least one seed".into()));
    }
    let runs: Vec<Result<(SelectionState<'t>, RunStats, FlopLedger)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut local = FlopLedger::new();
            let (_, state, stats) = run_seeded(topology, objective, cfg, n_tokens, seed, &mut local)?;
            Ok((state, stats, local))
        })
        .collect();
    let mut finals = Vec::with_capacity(seeds.len());
    let mut stats = Vec::with_capacity(seeds.len());
    for run in runs {
        let (state, s, local) = run?;
        ledger.merge(&local);
        finals.push(state);
        stats.push(s);
    }
    let best_index = stats.iter().enumerate().fold(0, |best, (i, s)| {
        if s.final_capacity > stats[best].final_capacity {
            i
        } else {
            best
        }
    });
    Ok(RaceResult {
        best: finals[best_index].clone(),
        best_index,
        finals,
        stats,
    })
}

/// Undoes `trace` from `final_marking`, last firing first.
pub fn replay_backward<'t>(final_marking: &SelectionState<'t>, trace: &[FiringRecord]) -> Result<SelectionState<'t>> {
    let mut state = final_marking.clone();
    for r in trace.iter().rev() {
        if !state.tokens[r.to] || state.tokens[r.from] {
            return Err(Error::Contract(format!(
                "trace entry {} -> {} does not match the marking",
                r.from, r.to
            )));
        }
        state.move_token(r.to, r.from);
    }
    Ok(state)
}

/// Writes the trace as `pass,from,to,delta` lines under a header.
pub fn write_trace<W: Write>(mut out: W, trace: &[FiringRecord]) -> Result<()> {
    writeln!(out, "pass,from,to,delta")?;
    for r in trace {
        writeln!(out, "{},{},{},{}", r.pass, r.from, r.to, r.delta)?;
    }
    Ok(())
}

/// Parses what [`write_trace`] produced.
pub fn read_trace(text: &str) -> Result<Vec<FiringRecord>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let err = || Error::Parse {
            line: idx + 1,
            message: format!("bad trace line {line:?}"),
        };
        if f.len() != 4 {
            return Err(err());
        }
        out.push(FiringRecord {
            pass: f[0].parse().map_err(|_| err())?,
            from: f[1].parse().map_err(|_| err())?,
            to: f[2].parse().map_err(|_| err())?,
            delta: f[3].parse().map_err(|_| err())?,
        });
    }
    Ok(out)
}
