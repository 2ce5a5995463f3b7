//! Experiment configuration shared by all subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use ril_core::invariance::order::{OrderConfig, DEFAULT_ROSTER};
use ril_core::invariance::{CheckConfig, MdpSource, TableConfig};
use ril_core::transforms::SampleMode;
use ril_core::{ObjectKind, ObjectParams, Resolution, SamplerConfig, SolverParams, TransformClass};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Trials per invariance check; samples per class when building the
    /// refinement pool.
    pub trials: usize,
    /// Counterexample search budget per check.
    pub budget: usize,
    /// Member-mode samples per hand-built MDP in the refinement pool.
    pub special_trials: usize,
    /// MDP redraws per trial before a class counts as unsupported.
    pub max_attempts: usize,
    /// Relative comparison tolerance.
    pub tol: f64,
    /// Scale of sampled transformations.
    pub magnitude: f64,
    pub solver: SolverParams,
    pub resolution: Resolution,
    pub sampler: SamplerConfig,
    /// Object roster; empty means the subcommand default.
    pub kinds: Vec<ObjectKind>,
    /// Class roster; empty means all classes.
    pub classes: Vec<TransformClass>,
    /// Output directory. Reports go to stdout when unset.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            trials: 100,
            budget: 200,
            special_trials: 20,
            max_attempts: 50,
            tol: 1e-8,
            magnitude: 1.0,
            solver: SolverParams::default(),
            resolution: Resolution::default(),
            sampler: SamplerConfig::default(),
            kinds: Vec::new(),
            classes: Vec::new(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let counts = [
            ("trials", self.trials),
            ("budget", self.budget),
            ("special_trials", self.special_trials),
            ("max_attempts", self.max_attempts),
            ("solver.max_iters", self.solver.max_iters),
            ("resolution.fragment_len", self.resolution.fragment_len),
            ("resolution.cycle_cap", self.resolution.cycle_cap),
            ("resolution.enumeration_cap", self.resolution.enumeration_cap),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Failure::input(format!("{name} must be positive")));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Failure::input(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.magnitude.is_finite() && self.magnitude > 0.0) {
            return Err(Failure::input(format!("magnitude must be positive, got {}", self.magnitude)));
        }
        self.solver.validate()?;
        self.sampler.validate()?;
        Ok(())
    }

    pub fn params(&self) -> ObjectParams {
        ObjectParams { solver: self.solver, resolution: self.resolution, tol: self.tol }
    }

    pub fn check_config(&self, mode: SampleMode, source: MdpSource) -> CheckConfig {
        CheckConfig {
            seed: self.seed,
            trials: self.trials,
            budget: self.budget,
            max_attempts: self.max_attempts,
            magnitude: self.magnitude,
            mode,
            params: self.params(),
            source,
        }
    }

    pub fn table_config(&self) -> TableConfig {
        TableConfig {
            seed: self.seed,
            trials: self.trials,
            budget: self.budget,
            magnitude: self.magnitude,
            sampler: self.sampler.clone(),
            params: self.params(),
            kinds: self.kinds.clone(),
            classes: self.classes.clone(),
        }
    }

    pub fn order_config(&self) -> OrderConfig {
        let kinds = if self.kinds.is_empty() { DEFAULT_ROSTER.to_vec() } else { self.kinds.clone() };
        OrderConfig {
            seed: self.seed,
            kinds,
            trials_per_class: self.trials,
            special_trials: self.special_trials,
            sampler: self.sampler.clone(),
            params: self.params(),
        }
    }
}
