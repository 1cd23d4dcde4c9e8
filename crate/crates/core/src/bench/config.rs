//! Experiment configuration files.
//!
//! A config is a TOML file with three flat sections:
//!
//! ```toml
//! [problem]
//! regime = "smooth_h"
//! dim_x = 20
//! dim_y = 10
//! seed = 1
//! conditioning = 16.0
//!
//! [run]
//! algorithms = ["ACV1", "APDTR2"]
//! max_iters = 300
//!
//! [rates]
//! conditioning = [4.0, 16.0, 64.0, 256.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::solvers::AlgorithmId;
use crate::tuning::Regime;

use super::generate::ProblemSpec;
use super::BenchError;

fn default_max_iters() -> u64 {
    300
}

fn default_slack() -> f64 {
    1e-7
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_instances() -> u64 {
    1
}

fn default_reference_tol() -> f64 {
    1e-11
}

fn default_scale() -> f64 {
    1.0
}

fn default_rates_iters() -> u64 {
    100_000
}

fn default_growth() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Empty means every accelerated method of the regime.
    #[serde(default)]
    pub algorithms: Vec<AlgorithmId>,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
    /// Relative slack of the contraction checks.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Target `value_k <= epsilon * value_0` for iteration counts.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Number of seeds, starting at `problem.seed`.
    #[serde(default = "default_instances")]
    pub instances: u64,
    /// KKT residual the reference solution must reach.
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    /// Record wall time; traces are then no longer byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_z: Option<f64>,
    /// Multiplies the resolved `eta_x`.
    #[serde(default = "default_scale")]
    pub eta_x_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            algorithms: Vec::new(),
            max_iters: default_max_iters(),
            slack: default_slack(),
            epsilon: default_epsilon(),
            instances: default_instances(),
            reference_tol: default_reference_tol(),
            timing: false,
            eta_x: None,
            eta_y: None,
            eta_z: None,
            eta_x_scale: 1.0,
            out: None,
        }
    }
}

impl RunSection {
    pub fn has_overrides(&self) -> bool {
        self.eta_x.is_some() || self.eta_y.is_some() || self.eta_z.is_some() || self.eta_x_scale != 1.0
    }
}

/// Sweep for `rates`: exactly one of the two lists is non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditioning: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_min: Vec<f64>,
    /// Allowed factor between measured and predicted growth.
    #[serde(default = "default_growth")]
    pub growth_factor: f64,
    #[serde(default = "default_rates_iters")]
    pub max_iters: u64,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self {
            conditioning: Vec::new(),
            lambda_min: Vec::new(),
            growth_factor: default_growth(),
            max_iters: default_rates_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesSection>,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        Self {
            problem,
            run: RunSection::default(),
            rates: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn regime(&self) -> Regime {
        self.problem.regime
    }

    /// Configured algorithms, or the accelerated methods of the regime.
    pub fn algorithms(&self) -> Vec<AlgorithmId> {
        if !self.run.algorithms.is_empty() {
            return self.run.algorithms.clone();
        }
        if self.regime() == Regime::TwoFunction {
            AlgorithmId::ACCELERATED_TWO.to_vec()
        } else {
            AlgorithmId::ACCELERATED_PD.to_vec()
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        self.problem.validate()?;
        let pd = self.regime() != Regime::TwoFunction;
        for a in &self.run.algorithms {
            if a.is_primal_dual() != pd {
                return bad(format!("algorithm {a} does not apply to the {} regime", self.regime()));
            }
        }
        if self.run.instances == 0 {
            return bad("run.instances must be at least 1".into());
        }
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.run.slack) || !(pos(self.run.epsilon) && self.run.epsilon < 1.0) {
            return bad("run.slack must be positive and run.epsilon must lie in (0, 1)".into());
        }
        if !pos(self.run.reference_tol) || !pos(self.run.eta_x_scale) {
            return bad("run.reference_tol and run.eta_x_scale must be positive".into());
        }
        if !pd && self.run.eta_y.is_some() {
            return bad("eta_y is meaningless in the two_function regime".into());
        }
        if let Some(r) = &self.rates {
            match (r.conditioning.is_empty(), r.lambda_min.is_empty()) {
                (false, true) => {
                    if r.conditioning.iter().any(|v| !pos(*v)) {
                        return bad("rates.conditioning entries must be positive".into());
                    }
                }
                (true, false) => {
                    if self.regime() != Regime::NonsmoothH {
                        return bad("rates.lambda_min sweeps need the nonsmooth_h regime".into());
                    }
                    if r.lambda_min.iter().any(|v| !pos(*v)) {
                        return bad("rates.lambda_min entries must be positive".into());
                    }
                }
                _ => return bad("rates needs exactly one of conditioning or lambda_min".into()),
            }
            if !(pos(r.growth_factor) && r.max_iters > 0) {
                return bad("rates.growth_factor and rates.max_iters must be positive".into());
            }
        }
        Ok(())
    }
}
