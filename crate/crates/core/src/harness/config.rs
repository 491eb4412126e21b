use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{binomial, EXHAUSTIVE_LIMIT};
use crate::channel::SceneConfig;
use crate::error::{Error, Result};
use crate::metrics::CostBasis;
use crate::rpn::GuardScaling;
use crate::topology::EdgeRule;

/// Selection algorithms the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Random,
    Greedy,
    Rpn,
    Nn,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// How antennas are assigned to toroid places.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceMapping {
    /// Place `i` is antenna `i`.
    #[default]
    Index,
    /// Rows are bands of `y`, columns follow `x` within a band.
    Spatial,
}

/// Settings for the flop experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlopsConfig {
    /// Selected counts for the flops-versus-selection table.
    pub n_grid: Vec<usize>,
    pub nn_iterations: usize,
    /// Array sizes for the scaling fit.
    pub scaling_grid: Vec<usize>,
    pub scaling_users: usize,
    pub scaling_subcarriers: usize,
    pub scaling_selected_fraction: f64,
    pub scaling_seeds: usize,
    /// Charging of local evaluations in the scaling fit.
    pub scaling_cost_basis: CostBasis,
}

impl Default for FlopsConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![4, 8, 16, 24, 32, 40, 48, 56, 64],
            nn_iterations: 50,
            scaling_grid: vec![16, 64, 256],
            scaling_users: 4,
            scaling_subcarriers: 4,
            scaling_selected_fraction: 0.25,
            scaling_seeds: 3,
            scaling_cost_basis: CostBasis::Neighbourhood,
        }
    }
}

/// Everything one experiment run needs; loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `n_users` and `seed` are set per grid point.
    pub scene: SceneConfig,
    pub rho_db: f64,
    pub users: Vec<usize>,
    /// Selected-antenna counts; pairs with fewer antennas than users are skipped.
    pub tokens: Vec<usize>,
    pub algorithms: Vec<AlgorithmKind>,
    /// Nets per RPN race; absent picks 5 for up to `sqrt(N_T)` users, else 1.
    /// Defaults to 5 at every user count, so both race summaries are of five.
    pub k_race: Option<usize>,
    pub csi_errors: Vec<f64>,
    pub subcarrier_fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub toroid_rows: usize,
    pub toroid_cols: usize,
    pub mapping: PlaceMapping,
    pub edge_rule: EdgeRule,
    pub guard_scaling: GuardScaling,
    pub max_passes: usize,
    pub nn_iterations: usize,
    /// NN neighbourhood size; absent means every other antenna.
    pub nn_neighbours: Option<usize>,
    /// Charging of RPN guards and NN membership evaluations.
    pub cost_basis: CostBasis,
    pub flops: FlopsConfig,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            rho_db: -5.0,
            users: vec![4, 8, 12, 16],
            tokens: vec![4, 8, 12, 16, 24, 32, 48, 64],
            algorithms: vec![AlgorithmKind::Random, AlgorithmKind::Greedy, AlgorithmKind::Rpn],
            k_race: Some(5),
            csi_errors: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            subcarrier_fractions: vec![1.0 / 64.0, 1.0 / 8.0, 0.25, 0.5, 1.0],
            seeds: (0..20).collect(),
            toroid_rows: 4,
            toroid_cols: 16,
            mapping: PlaceMapping::Index,
            edge_rule: EdgeRule::default(),
            guard_scaling: GuardScaling::Local,
            max_passes: 20,
            nn_iterations: 50,
            nn_neighbours: None,
            cost_basis: CostBasis::Selected,
            flops: FlopsConfig::default(),
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn k_race_for(&self, n_users: usize) -> usize {
        self.k_race.unwrap_or_else(|| {
            if (n_users * n_users) as f64 <= self.scene.n_tx as f64 {
                5
            } else {
                1
            }
        })
    }

    /// Selected counts used with `n_users` users.
    pub fn tokens_for(&self, n_users: usize) -> Vec<usize> {
        self.tokens.iter().copied().filter(|&t| t >= n_users).collect()
    }

    /// Rejects anything that would fail mid-sweep.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.scene.validate() {
            problems.push(e.to_string());
        }
        if !self.rho_db.is_finite() {
            problems.push("rho_db must be finite".into());
        }
        if self.users.is_empty() || self.tokens.is_empty() || self.seeds.is_empty() || self.algorithms.is_empty() {
            problems.push("users, tokens, seeds and algorithms must be non-empty".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            problems.push("seeds must be distinct".into());
        }
        if self.users.contains(&0) || self.tokens.contains(&0) {
            problems.push("user and token counts must be at least 1".into());
        }
        if self.tokens.iter().any(|&t| t > self.scene.n_tx) {
            problems.push(format!("token counts cannot exceed n_tx = {}", self.scene.n_tx));
        }
        if self.users.iter().all(|&u| self.tokens_for(u).is_empty()) {
            problems.push("no (users, tokens) pair has at least as many antennas as users".into());
        }
        if self.toroid_rows * self.toroid_cols != self.scene.n_tx {
            problems.push(format!(
                "toroid {}x{} does not hold n_tx = {}",
                self.toroid_rows, self.toroid_cols, self.scene.n_tx
            ));
        }
        if self.toroid_rows < 2 || self.toroid_cols < 2 {
            problems.push("toroid needs at least 2 rows and 2 columns".into());
        }
        if self.k_race == Some(0) || self.max_passes == 0 || self.nn_iterations == 0 {
            problems.push("k_race, max_passes and nn_iterations must be at least 1".into());
        }
        if self.csi_errors.iter().any(|e| !(0.0..=1.0).contains(e)) {
            problems.push("csi_errors must lie in [0, 1]".into());
        }
        if self.subcarrier_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            problems.push("subcarrier_fractions must lie in (0, 1]".into());
        }
        if self.algorithms.contains(&AlgorithmKind::Exhaustive) {
            for &u in &self.users {
                for t in self.tokens_for(u) {
                    if binomial(self.scene.n_tx, t) > EXHAUSTIVE_LIMIT {
                        problems.push(format!(
                            "exhaustive search over {t} of {} antennas exceeds {EXHAUSTIVE_LIMIT} subsets",
                            self.scene.n_tx
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_unknown_keys() {
        let cfg = ExperimentConfig::from_toml_str(
            "rho_db = 0.0\nusers = [2]\nalgorithms = [\"rpn\", \"nn\"]\n[scene]\nn_subcarriers = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.users, vec![2]);
        assert_eq!(cfg.scene.n_subcarriers, 8);
        assert_eq!(cfg.scene.n_tx, 64);
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn rejects_duplicate_seeds_and_bad_toroid() {
        let cfg = ExperimentConfig {
            seeds: vec![1, 1],
            toroid_rows: 3,
            ..ExperimentConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("distinct") && msg.contains("toroid"));
    }

    #[test]
    fn exhaustive_bound_checked_up_front() {
        let cfg = ExperimentConfig {
            algorithms: vec![AlgorithmKind::Exhaustive],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn race_width_rule() {
        let cfg = ExperimentConfig {
            k_race: None,
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::default().k_race_for(16), 5);
        assert_eq!(cfg.k_race_for(4), 5);
        assert_eq!(cfg.k_race_for(8), 5);
        assert_eq!(cfg.k_race_for(12), 1);
    }
}
