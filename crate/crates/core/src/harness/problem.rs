use std::sync::Arc;

use crate::diagnostics::{
    cost_error_metric, grad_norm_metric, param_error_metric, MetricDef, COST_ERROR, GRAD_NORM,
    PARAM_ERROR,
};
use crate::lqg::{expected_cost, lqg_objective, perturbed_init, riccati_optimal_gain};
use crate::oracle::{nonconvex_objective, quadratic_objective, StochasticObjective};
use crate::rng::{sample_unit_sphere, RngStream, StreamRole};

use super::config::ProblemConfig;
use super::HarnessError;

/// An instantiated problem: the objective plus its reference solution.
#[derive(Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub objective: Arc<dyn StochasticObjective>,
    /// Known minimizer, when unique.
    pub target_point: Option<Vec<f64>>,
    /// Known optimal expected value.
    pub target_value: Option<f64>,
}

impl Problem {
    pub fn build(config: &ProblemConfig) -> Result<Self, HarnessError> {
        let problem = match config {
            ProblemConfig::Quadratic(p) => Problem {
                config: config.clone(),
                objective: Arc::new(quadratic_objective(p.dimension, p.noise_std)),
                target_point: Some(vec![0.0; p.dimension]),
                target_value: Some(0.0),
            },
            ProblemConfig::Nonconvex(p) => {
                let obj = nonconvex_objective(p.dimension, p.noise_std);
                let min = obj.minimum_value();
                Problem {
                    config: config.clone(),
                    objective: Arc::new(obj),
                    target_point: None,
                    target_value: Some(min),
                }
            }
            ProblemConfig::Lqg(sys) => {
                let kstar = riccati_optimal_gain(sys)?;
                Problem {
                    config: config.clone(),
                    objective: Arc::new(lqg_objective(sys.clone())?),
                    target_point: Some(vec![kstar.value()]),
                    target_value: Some(expected_cost(sys, kstar)),
                }
            }
        };
        Ok(problem)
    }

    pub fn metric(&self, name: &str) -> Result<MetricDef, HarnessError> {
        match name {
            GRAD_NORM => Ok(grad_norm_metric(self.objective.clone())?),
            PARAM_ERROR => match &self.target_point {
                Some(t) => Ok(param_error_metric(t.clone())),
                None => Err(HarnessError::Config(
                    "param_error needs a unique known minimizer".into(),
                )),
            },
            COST_ERROR => match self.target_value {
                Some(v) => Ok(cost_error_metric(self.objective.clone(), v)?),
                None => Err(HarnessError::Config(
                    "cost_error needs a known optimum".into(),
                )),
            },
            other => Err(HarnessError::Config(format!("unknown metric {other:?}"))),
        }
    }

    pub fn metrics(&self, names: &[String]) -> Result<Vec<MetricDef>, HarnessError> {
        names.iter().map(|n| self.metric(n)).collect()
    }

    /// Starting point for one trial index, shared by every method.
    pub fn initial_point(&self, base_seed: u64, trial: u64) -> Vec<f64> {
        let mut rng = RngStream::derive(base_seed, trial, "", StreamRole::Init);
        match &self.config {
            ProblemConfig::Quadratic(p) | ProblemConfig::Nonconvex(p) => match &p.x0 {
                Some(x0) => x0.clone(),
                None => sample_unit_sphere(&mut rng, p.dimension)
                    .map(|u| u.into_vec())
                    .unwrap_or_else(|_| vec![0.0; p.dimension]),
            },
            ProblemConfig::Lqg(_) => {
                let kstar = self.target_point.as_ref().map_or(0.0, |t| t[0]);
                vec![perturbed_init(crate::lqg::PolicyGain(kstar), &mut rng).value()]
            }
        }
    }
}
