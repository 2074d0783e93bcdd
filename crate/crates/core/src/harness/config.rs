use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{COST_ERROR, GRAD_NORM, PARAM_ERROR};
use crate::estimator::{Coefficient, EstimatorKind};
use crate::lqg::LqgSystem;
use crate::optimizer::StepSize;

use super::HarnessError;

/// Default optimizer budget for experiments.
pub const DEFAULT_OPTIMIZER_T: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProblem {
    pub dimension: usize,
    #[serde(default)]
    pub noise_std: f64,
    /// Starting point shared by every trial; drawn uniformly on the unit
    /// sphere per trial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Quadratic(SyntheticProblem),
    Nonconvex(SyntheticProblem),
    Lqg(LqgSystem),
}

impl ProblemConfig {
    pub fn dimension(&self) -> usize {
        match self {
            ProblemConfig::Quadratic(p) | ProblemConfig::Nonconvex(p) => p.dimension,
            ProblemConfig::Lqg(_) => 1,
        }
    }

    /// Metrics this problem can report.
    pub fn supported_metrics(&self) -> &'static [&'static str] {
        match self {
            ProblemConfig::Quadratic(_) | ProblemConfig::Lqg(_) => {
                &[PARAM_ERROR, COST_ERROR, GRAD_NORM]
            }
            // two symmetric minimizers per coordinate: no single target point
            ProblemConfig::Nonconvex(_) => &[COST_ERROR, GRAD_NORM],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// Stable identifier; keys the method's random streams and output files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub estimator: EstimatorKind,
    pub eta: StepSize,
    pub delta: f64,
    #[serde(default)]
    pub coefficient: Coefficient,
}

impl MethodConfig {
    pub fn new(estimator: EstimatorKind, eta: f64, delta: f64) -> Self {
        Self {
            id: None,
            estimator,
            eta: StepSize::Fixed(eta),
            delta,
            coefficient: Coefficient::default(),
        }
    }

    pub fn id(&self) -> &str {
        self.id.as_deref().unwrap_or(self.estimator.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub methods: Vec<MethodConfig>,
    pub trials: usize,
    #[serde(default = "default_optimizer_t")]
    pub optimizer_t: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Metric names; the problem's full supported list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<String>>,
}

fn default_optimizer_t() -> usize {
    DEFAULT_OPTIMIZER_T
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// The experiment behind the LQG figures: PSGD-U, PSGD-G and ZO on the
    /// benchmark plant, 10 trials of 500 iterations.
    pub fn lqg_benchmark(noise_std: f64, methods: Vec<MethodConfig>) -> Self {
        Self {
            problem: ProblemConfig::Lqg(LqgSystem::benchmark(noise_std)),
            methods,
            trials: 10,
            optimizer_t: DEFAULT_OPTIMIZER_T,
            base_seed: 0,
            output_dir: default_output_dir(),
            metrics: Some(vec![PARAM_ERROR.into(), COST_ERROR.into()]),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn metric_names(&self) -> Vec<String> {
        match &self.metrics {
            Some(m) => m.clone(),
            None => self
                .problem
                .supported_metrics()
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.optimizer_t == 0 {
            return bad("optimizer_t must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        match &self.problem {
            ProblemConfig::Quadratic(p) | ProblemConfig::Nonconvex(p) => {
                if p.dimension == 0 {
                    return bad("problem dimension must be at least 1".into());
                }
                if !(p.noise_std >= 0.0 && p.noise_std.is_finite()) {
                    return bad(format!(
                        "noise_std must be nonnegative, got {}",
                        p.noise_std
                    ));
                }
                if let Some(x0) = &p.x0 {
                    if x0.len() != p.dimension {
                        return bad(format!(
                            "x0 has {} entries, dimension is {}",
                            x0.len(),
                            p.dimension
                        ));
                    }
                }
            }
            ProblemConfig::Lqg(sys) => sys.validate()?,
        }
        let mut ids = BTreeSet::new();
        for m in &self.methods {
            let id = m.id();
            if id.is_empty()
                || !id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return bad(format!("method id {id:?} must be nonempty [A-Za-z0-9_-]"));
            }
            if !ids.insert(id.to_string()) {
                return bad(format!("duplicate method id {id:?}"));
            }
            if !(m.delta > 0.0 && m.delta.is_finite()) {
                return bad(format!(
                    "method {id}: delta must be positive, got {}",
                    m.delta
                ));
            }
            if let StepSize::Fixed(eta) = m.eta {
                if !(eta > 0.0 && eta.is_finite()) {
                    return bad(format!("method {id}: eta must be positive, got {eta}"));
                }
            }
        }
        let supported = self.problem.supported_metrics();
        let mut seen = BTreeSet::new();
        for name in self.metric_names() {
            if !supported.contains(&name.as_str()) {
                return bad(format!("metric {name:?} is not available for this problem"));
            }
            if !seen.insert(name.clone()) {
                return bad(format!("duplicate metric {name:?}"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
