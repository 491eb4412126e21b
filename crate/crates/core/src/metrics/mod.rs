//! Analytic flop accounting.
//!
//! Costs are counted from matrix dimensions, never from hardware counters.
//! The cost model, in real floating point operations:
//!
//! | operation | flops |
//! |---|---|
//! | complex `m x k` by `k x n` product | `8 m k n` |
//! | `log2 det` of an `n x n` Hermitian PD matrix | `4n(n-1)(n-2)/3 + 3n(n-1) + 3n - 1` |
//! | one capacity term `log2 det(I + c H_c P H_c^H)`, `H_c` is `n_ts x n_r` | `8 n_ts n_r^2 + 8 n_ts^2 n_r + 2 n_ts^2 + n_ts + logdet(n_ts)` |
//! | objective averaged over `s` subcarriers | `s * capacity + s` |
//!
//! The log-det count follows the Cholesky recurrence column by column:
//! `4j` flops for the pivot of column `j`, one log and one add to accumulate
//! it, and for every column but the last one square root plus `8j + 2` flops
//! per entry below the diagonal. Leading term `(4/3) n^3`.
//!
//! The capacity count is the literal product `(H_c P) H_c^H` followed by the
//! scaling, the identity shift and the log-det; it is charged the same way
//! whichever algebraically equivalent route the code takes, so counts depend
//! only on the algorithm's sequence of evaluations. Matrix products are
//! classical (exponent 3); fast multiplication is not modelled.
//!
//! Local evaluations (RPN guards, NN membership) are charged at the number
//! of selected antennas they involve, or with [`CostBasis::Neighbourhood`]
//! at the full neighbourhood size, the worst case a node can face.

mod scaling;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use scaling::{
    compare_flops, fit_loglog_slope, measure_scaling, measure_scaling_with, toroid_shape_for, Algorithm,
    FlopsComparison, FlopsRow, ScalingPoint, ScalingReport, ScalingTemplate,
};

/// Row count a local evaluation is charged at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostBasis {
    /// The selected antennas actually involved.
    #[default]
    Selected,
    /// Every antenna of the neighbourhood, as if all were selected.
    Neighbourhood,
}

impl CostBasis {
    pub fn rows(self, selected: usize, neighbourhood: usize) -> usize {
        match self {
            CostBasis::Selected => selected,
            CostBasis::Neighbourhood => neighbourhood.max(selected),
        }
    }
}

pub fn flops_matmul(m: usize, k: usize, n: usize) -> u64 {
    8 * (m * k * n) as u64
}

/// Cost of `log2 det` of an `n x n` Hermitian positive-definite matrix.
pub fn flops_logdet(n: usize) -> u64 {
    assert!(n >= 1, "log-det of an empty matrix");
    let n = n as u64;
    4 * n * (n - 1) * n.saturating_sub(2) / 3 + 3 * n * (n - 1) + 3 * n - 1
}

/// Cost of one capacity term for an `n_ts x n_r` channel submatrix.
pub fn flops_capacity(n_ts: usize, n_r: usize) -> u64 {
    if n_ts == 0 {
        return 0;
    }
    flops_matmul(n_ts, n_r, n_r)
        + flops_matmul(n_ts, n_r, n_ts)
        + 2 * (n_ts * n_ts) as u64
        + n_ts as u64
        + flops_logdet(n_ts)
}

/// Cost of the subcarrier-averaged objective.
pub fn flops_objective(n_ts: usize, n_r: usize, n_subcarriers: usize) -> u64 {
    if n_ts == 0 {
        return 0;
    }
    n_subcarriers as u64 * (flops_capacity(n_ts, n_r) + 1)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LedgerKey {
    pub algorithm: String,
    pub phase: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LedgerEntry {
    pub flops: u64,
    /// Objective evaluations (each covers every subcarrier).
    pub evaluations: u64,
    /// Log-det factorisations (one per subcarrier per evaluation).
    pub factorisations: u64,
    /// Evaluation count by `(n_ts, n_r, n_subcarriers)`.
    pub by_shape: BTreeMap<(usize, usize, usize), u64>,
}

/// Flop counters keyed by algorithm and phase. Counters only grow.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlopLedger {
    entries: BTreeMap<LedgerKey, LedgerEntry>,
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn entry(&mut self, algorithm: &str, phase: &str) -> &mut LedgerEntry {
        self.entries
            .entry(LedgerKey {
                algorithm: algorithm.to_string(),
                phase: phase.to_string(),
            })
            .or_default()
    }

    /// Charges one objective evaluation of an `n_ts x n_r` submatrix.
    pub fn record_objective(&mut self, algorithm: &str, phase: &str, n_ts: usize, n_r: usize, n_subcarriers: usize) {
        let e = self.entry(algorithm, phase);
        e.flops += flops_objective(n_ts, n_r, n_subcarriers);
        e.evaluations += 1;
        if n_ts > 0 {
            e.factorisations += n_subcarriers as u64;
        }
        *e.by_shape.entry((n_ts, n_r, n_subcarriers)).or_default() += 1;
    }

    pub fn record_flops(&mut self, algorithm: &str, phase: &str, flops: u64) {
        self.entry(algorithm, phase).flops += flops;
    }

    pub fn merge(&mut self, other: &FlopLedger) {
        for (key, e) in &other.entries {
            let mine = self.entries.entry(key.clone()).or_default();
            mine.flops += e.flops;
            mine.evaluations += e.evaluations;
            mine.factorisations += e.factorisations;
            for (shape, n) in &e.by_shape {
                *mine.by_shape.entry(*shape).or_default() += n;
            }
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&LedgerKey, &LedgerEntry)> {
        self.entries.iter()
    }

    pub fn get(&self, algorithm: &str, phase: &str) -> Option<&LedgerEntry> {
        self.entries.get(&LedgerKey {
            algorithm: algorithm.to_string(),
            phase: phase.to_string(),
        })
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|e| e.flops).sum()
    }

    pub fn total_for(&self, algorithm: &str) -> u64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.algorithm == algorithm)
            .map(|(_, e)| e.flops)
            .sum()
    }

    pub fn evaluations_for(&self, algorithm: &str) -> u64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.algorithm == algorithm)
            .map(|(_, e)| e.evaluations)
            .sum()
    }

    /// Flops recomputed from the shape histograms; equals [`Self::total`]
    /// when only objective evaluations were charged.
    pub fn recompute_from_shapes(&self) -> u64 {
        self.entries
            .values()
            .flat_map(|e| e.by_shape.iter())
            .map(|(&(n_ts, n_r, s), &count)| count * flops_objective(n_ts, n_r, s))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_cost_small() {
        // one log and one add
        assert_eq!(flops_logdet(1), 2);
        // column 0: log, add, sqrt, one scaled entry (2); column 1: pivot (4), log, add
        assert_eq!(flops_logdet(2), 11);
        assert_eq!(flops_logdet(3), 8 + 18 + 8);
    }

    #[test]
    fn logdet_cost_is_cubic() {
        let r64 = flops_logdet(128) as f64 / flops_logdet(64) as f64;
        let r128 = flops_logdet(256) as f64 / flops_logdet(128) as f64;
        assert!((r128 - 8.0).abs() < (r64 - 8.0).abs());
        assert!((r128 - 8.0).abs() < 0.2);
    }

    #[test]
    fn matmul_cost() {
        assert_eq!(flops_matmul(2, 3, 4), 192);
    }

    #[test]
    fn ledger_merge_and_recompute() {
        let mut a = FlopLedger::new();
        a.record_objective("rpn", "guard", 3, 2, 4);
        a.record_objective("rpn", "guard", 0, 2, 4);
        let mut b = FlopLedger::new();
        b.record_objective("rpn", "guard", 3, 2, 4);
        b.record_objective("nn", "membership", 5, 2, 4);
        a.merge(&b);
        assert_eq!(a.get("rpn", "guard").unwrap().evaluations, 3);
        assert_eq!(a.total_for("rpn"), 2 * flops_objective(3, 2, 4));
        assert_eq!(a.total(), a.recompute_from_shapes());
        assert_eq!(a.get("rpn", "guard").unwrap().factorisations, 8);
    }
}
