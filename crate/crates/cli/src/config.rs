use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use orthotropic_core::acceptance::AcceptanceConfig;
use orthotropic_core::grid::FieldFormat;
use orthotropic_core::lemmas::SuiteConfig;
use orthotropic_core::scenarios::DefaultScenario;
use orthotropic_core::solver::SolverConfig;
use orthotropic_core::{Error, ProblemParams, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    pub p: f64,
    pub delta: Vec<f64>,
    /// Regularization used by `solve`.
    pub epsilon: f64,
    /// Levels used by `sweep`, `verify-energy` and `verify-gradient-bound`.
    pub epsilons: Vec<f64>,
    pub amplitude: f64,
    pub tilt: f64,
    pub reference_epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub half_side: f64,
    pub nodes_per_axis: usize,
    pub time_window: (f64, f64),
    /// `null` picks the natural step `Δt ≈ hᵖ`.
    pub time_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksBlock {
    pub seed: u64,
    pub smoothing_samples: usize,
    pub pair_samples: usize,
    pub radii: Vec<(f64, f64)>,
    pub theta: Option<f64>,
    pub moser_radii: (f64, f64),
    pub moser_j_max: usize,
    /// Dimension of the exact ledger written by `moser`; `null` uses the problem dimension.
    pub ledger_n: Option<usize>,
    pub ledger_j_max: usize,
    pub caccioppoli_radii: (f64, f64),
    pub caccioppoli_epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub field_format: FieldFormat,
    /// Whether `solve` writes the solution field.
    pub write_fields: bool,
}

/// The whole experiment; one JSON file drives a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemBlock,
    pub grid: GridBlock,
    pub solver: SolverConfig,
    pub checks: ChecksBlock,
    pub output: OutputBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let acc = AcceptanceConfig::default();
        let sc = acc.scenario;
        ExperimentConfig {
            problem: ProblemBlock {
                p: sc.p,
                delta: sc.delta,
                epsilon: acc.caccioppoli_epsilon,
                epsilons: acc.sweep_epsilons,
                amplitude: sc.amplitude,
                tilt: sc.tilt,
                reference_epsilon: sc.reference_epsilon,
            },
            grid: GridBlock {
                half_side: sc.half_side,
                nodes_per_axis: sc.nodes_per_axis,
                time_window: sc.time_window,
                time_steps: sc.time_steps,
            },
            solver: acc.solver,
            checks: ChecksBlock {
                seed: acc.suites.seed,
                smoothing_samples: acc.suites.smoothing_samples,
                pair_samples: acc.suites.pair_samples,
                radii: acc.radii,
                theta: acc.theta,
                moser_radii: acc.moser_radii,
                moser_j_max: acc.moser_j_max,
                ledger_n: None,
                ledger_j_max: acc.ledger_j_max,
                caccioppoli_radii: acc.caccioppoli_radii,
                caccioppoli_epsilon: acc.caccioppoli_epsilon,
            },
            output: OutputBlock {
                directory: None,
                field_format: FieldFormat::Binary,
                write_fields: true,
            },
        }
    }
}

impl Default for ProblemBlock {
    fn default() -> Self {
        ExperimentConfig::default().problem
    }
}

impl Default for GridBlock {
    fn default() -> Self {
        ExperimentConfig::default().grid
    }
}

impl Default for ChecksBlock {
    fn default() -> Self {
        ExperimentConfig::default().checks
    }
}

impl Default for OutputBlock {
    fn default() -> Self {
        ExperimentConfig::default().output
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn scenario(&self) -> DefaultScenario {
        DefaultScenario {
            p: self.problem.p,
            delta: self.problem.delta.clone(),
            half_side: self.grid.half_side,
            time_window: self.grid.time_window,
            nodes_per_axis: self.grid.nodes_per_axis,
            time_steps: self.grid.time_steps,
            amplitude: self.problem.amplitude,
            tilt: self.problem.tilt,
            reference_epsilon: self.problem.reference_epsilon,
        }
    }

    pub fn acceptance(&self) -> AcceptanceConfig {
        AcceptanceConfig {
            suites: SuiteConfig {
                seed: self.checks.seed,
                smoothing_samples: self.checks.smoothing_samples,
                pair_samples: self.checks.pair_samples,
            },
            scenario: self.scenario(),
            solver: self.solver.clone(),
            sweep_epsilons: self.problem.epsilons.clone(),
            radii: self.checks.radii.clone(),
            theta: self.checks.theta,
            moser_radii: self.checks.moser_radii,
            moser_j_max: self.checks.moser_j_max,
            ledger_j_max: self.checks.ledger_j_max,
            caccioppoli_radii: self.checks.caccioppoli_radii,
            caccioppoli_epsilon: self.checks.caccioppoli_epsilon,
        }
    }

    pub fn ledger_n(&self) -> usize {
        self.checks.ledger_n.unwrap_or(self.problem.delta.len())
    }

    /// Checks every block before anything is computed or written.
    pub fn validate(&self) -> Result<()> {
        ProblemParams::new(self.problem.p, self.problem.delta.clone(), self.problem.epsilon)?;
        if self.checks.smoothing_samples == 0 || self.checks.pair_samples == 0 {
            return Err(Error::param("checks.pair_samples", "sample counts must be positive"));
        }
        if let Some(n) = self.checks.ledger_n {
            if n < 2 {
                return Err(Error::param("n", format!("need n >= 2, got {n}")));
            }
        }
        self.acceptance().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.acceptance(), AcceptanceConfig::default());
    }

    #[test]
    fn unknown_keys_and_partial_blocks() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"problem": {"q": 1}}"#).is_err());
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"grid": {"nodes_per_axis": 17}}"#).unwrap();
        assert_eq!(cfg.grid.nodes_per_axis, 17);
        assert_eq!(cfg.grid.half_side, 1.0);
    }
}
