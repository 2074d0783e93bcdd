//! The comparison-feedback SGD loop: sample a direction, query the oracle,
//! form the estimate `g_t`, step `x_{t+1} = x_t - eta * g_t`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::diagnostics::MetricDef;
use crate::estimator::{estimate, EstimatorConfig, EstimatorError, EstimatorStreams};
use crate::oracle::{ObjectiveOracle, PairOracle, StochasticObjective};
use crate::rng::norm;

/// Smoothing parameter used when none is configured.
pub const DEFAULT_DELTA: f64 = 0.01;

/// A run is aborted once `||x_t||` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("iterate diverged at t={at}")]
    Diverged { at: usize, trace: Box<TrialTrace> },
    #[error("estimator failed at t={at}: {source}")]
    Estimator {
        at: usize,
        #[source]
        source: EstimatorError,
        trace: Box<TrialTrace>,
    },
}

impl OptimizerError {
    /// The partial trace recorded before the failure, if any.
    pub fn trace(&self) -> Option<&TrialTrace> {
        match self {
            OptimizerError::InvalidConfig(_) => None,
            OptimizerError::Diverged { trace, .. } | OptimizerError::Estimator { trace, .. } => {
                Some(trace)
            }
        }
    }

    pub fn into_trace(self) -> Option<TrialTrace> {
        match self {
            OptimizerError::InvalidConfig(_) => None,
            OptimizerError::Diverged { trace, .. } | OptimizerError::Estimator { trace, .. } => {
                Some(*trace)
            }
        }
    }
}

/// Step size: a fixed value or `T^{-1/2}`.
///
/// Serialized as a number or the string `"theorem"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    Theorem,
}

impl StepSize {
    pub fn resolve(self, iterations: usize) -> f64 {
        match self {
            StepSize::Fixed(eta) => eta,
            StepSize::Theorem => theorem_schedule(iterations, None).eta,
        }
    }
}

impl Serialize for StepSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StepSize::Fixed(v) => s.serialize_f64(*v),
            StepSize::Theorem => s.serialize_str("theorem"),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct StepVisitor;
        impl Visitor<'_> for StepVisitor {
            type Value = StepSize;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive number or \"theorem\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<StepSize, E> {
                Ok(StepSize::Fixed(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<StepSize, E> {
                Ok(StepSize::Fixed(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<StepSize, E> {
                Ok(StepSize::Fixed(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<StepSize, E> {
                match v {
                    "theorem" => Ok(StepSize::Theorem),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(StepVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub eta: f64,
    pub delta: f64,
}

/// `eta = T^{-1/2}` with a constant smoothing parameter.
pub fn theorem_schedule(iterations: usize, delta: Option<f64>) -> Schedule {
    Schedule {
        eta: (iterations.max(1) as f64).powf(-0.5),
        delta: delta.unwrap_or(DEFAULT_DELTA),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub step: StepSize,
    pub estimator: EstimatorConfig,
    pub x0: Vec<f64>,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.iterations == 0 {
            return Err(OptimizerError::InvalidConfig(
                "iterations must be at least 1".into(),
            ));
        }
        if let StepSize::Fixed(eta) = self.step {
            // eta = 0 is accepted as a degenerate frozen run
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(OptimizerError::InvalidConfig(format!(
                    "step size must be positive, got {eta}"
                )));
            }
        }
        self.estimator
            .validate()
            .map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?;
        if self.x0.len() != self.estimator.dimension {
            return Err(OptimizerError::InvalidConfig(format!(
                "x0 has dimension {}, estimator expects {}",
                self.x0.len(),
                self.estimator.dimension
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub x: Vec<f64>,
    /// Metric values in the order of [`TrialTrace::metric_names`].
    pub metrics: Vec<f64>,
    /// Feedback received at this iterate (sign or raw difference); absent on
    /// the final row.
    pub feedback: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub config: OptimizerConfig,
    pub metric_names: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub final_x: Vec<f64>,
    /// Iteration at which the run stopped early, if it did.
    pub stopped_at: Option<usize>,
}

impl TrialTrace {
    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metric_names.iter().position(|m| m == name)
    }

    /// Values of one metric over `t = 0..`.
    pub fn metric_series(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.metric_index(name)?;
        Some(self.records.iter().map(|r| r.metrics[i]).collect())
    }
}

/// One gradient step.
pub fn step(x: &[f64], eta: f64, g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect()
}

fn record(t: usize, x: &[f64], metrics: &[MetricDef]) -> TraceRecord {
    TraceRecord {
        t,
        x: x.to_vec(),
        metrics: metrics.iter().map(|m| m.compute(x)).collect(),
        feedback: None,
    }
}

/// Runs on an objective with streams derived from `cfg.seed`.
pub fn run(
    obj: &dyn StochasticObjective,
    cfg: &OptimizerConfig,
    metrics: &[MetricDef],
) -> Result<TrialTrace, OptimizerError> {
    let mut streams = EstimatorStreams::derive(cfg.seed, 0, cfg.estimator.kind.name());
    let mut oracle = ObjectiveOracle::new(obj);
    run_with_oracle(&mut oracle, cfg, metrics, &mut streams)
}

/// Runs `cfg.iterations` steps against any pair oracle.
///
/// Metrics are recorded before each update and once after the last, so a
/// complete trace has `iterations + 1` rows.
pub fn run_with_oracle(
    oracle: &mut dyn PairOracle,
    cfg: &OptimizerConfig,
    metrics: &[MetricDef],
    streams: &mut EstimatorStreams,
) -> Result<TrialTrace, OptimizerError> {
    cfg.validate()?;
    if oracle.dimension() != cfg.estimator.dimension {
        return Err(OptimizerError::InvalidConfig(format!(
            "oracle has dimension {}, config expects {}",
            oracle.dimension(),
            cfg.estimator.dimension
        )));
    }
    if let Some(m) = metrics
        .iter()
        .find(|m| m.dimension().is_some_and(|d| d != cfg.estimator.dimension))
    {
        return Err(OptimizerError::InvalidConfig(format!(
            "metric {} does not match dimension {}",
            m.name(),
            cfg.estimator.dimension
        )));
    }
    let eta = cfg.step.resolve(cfg.iterations);
    let mut trace = TrialTrace {
        config: cfg.clone(),
        metric_names: metrics.iter().map(|m| m.name().to_string()).collect(),
        records: Vec::with_capacity(cfg.iterations + 1),
        final_x: cfg.x0.clone(),
        stopped_at: None,
    };
    let mut x = cfg.x0.clone();
    for t in 0..cfg.iterations {
        let mut row = record(t, &x, metrics);
        let est = match estimate(oracle, t, &x, &cfg.estimator, streams) {
            Ok(est) => est,
            Err(source) => {
                trace.records.push(row);
                trace.final_x = x;
                trace.stopped_at = Some(t);
                return Err(OptimizerError::Estimator {
                    at: t,
                    source,
                    trace: Box::new(trace),
                });
            }
        };
        row.feedback = Some(est.feedback.value());
        trace.records.push(row);
        let next = step(&x, eta, &est.g);
        let n = norm(&next);
        if !n.is_finite() || n > DIVERGENCE_LIMIT {
            trace.final_x = x;
            trace.stopped_at = Some(t + 1);
            return Err(OptimizerError::Diverged {
                at: t + 1,
                trace: Box::new(trace),
            });
        }
        x = next;
    }
    trace.records.push(record(cfg.iterations, &x, metrics));
    trace.final_x = x;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorKind;
    use crate::oracle::quadratic_objective;

    fn cfg(
        kind: EstimatorKind,
        d: usize,
        iterations: usize,
        step: StepSize,
        delta: f64,
    ) -> OptimizerConfig {
        let mut x0 = vec![0.0; d];
        x0[0] = 1.0;
        OptimizerConfig {
            iterations,
            step,
            estimator: EstimatorConfig::new(kind, delta, d).unwrap(),
            x0,
            seed: 17,
        }
    }

    #[test]
    fn theorem_schedule_values() {
        assert!((theorem_schedule(100, None).eta - 0.1).abs() < 1e-15);
        assert_eq!(theorem_schedule(1, None).eta, 1.0);
        assert!((theorem_schedule(10_000, None).eta - 0.01).abs() < 1e-15);
        assert_eq!(theorem_schedule(10, None).delta, DEFAULT_DELTA);
        assert_eq!(theorem_schedule(10, Some(0.5)).delta, 0.5);
    }

    #[test]
    fn zero_step_keeps_x0() {
        let f = quadratic_objective(3, 0.0);
        let c = cfg(EstimatorKind::PsgdU, 3, 1, StepSize::Fixed(0.0), 0.1);
        let trace = run(&f, &c, &[]).unwrap();
        assert_eq!(trace.final_x, c.x0);
        assert_eq!(trace.records.len(), 2);
    }

    #[test]
    fn one_step_arithmetic() {
        // u = +1 and outcome +1 in one dimension: x1 = x0 - 0.1 * (1/0.1) * 1
        let g = crate::estimator::GradientEstimate::assemble(
            1.0 / 0.1,
            crate::estimator::Feedback::Sign(crate::oracle::ComparisonOutcome::Plus),
            crate::rng::Direction::new(vec![1.0]).unwrap(),
        );
        let x1 = step(&[2.5], 0.1, &g.g);
        assert!((x1[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn psgd_u_step_length_is_constant() {
        let f = quadratic_objective(4, 0.1);
        let c = cfg(EstimatorKind::PsgdU, 4, 200, StepSize::Fixed(0.003), 0.05);
        let trace = run(&f, &c, &[]).unwrap();
        let expected = 0.003 * 4.0 / 0.05;
        for w in trace.records.windows(2) {
            let d: Vec<f64> = w[1].x.iter().zip(&w[0].x).map(|(a, b)| a - b).collect();
            assert!((norm(&d) - expected).abs() < 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn trace_shape_and_determinism() {
        let f = quadratic_objective(2, 0.2);
        let c = cfg(EstimatorKind::ZoTwoPoint, 2, 50, StepSize::Theorem, 0.1);
        let a = run(&f, &c, &[]).unwrap();
        let b = run(&f, &c, &[]).unwrap();
        assert_eq!(a.records.len(), 51);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.t == i));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn huge_step_diverges_with_partial_trace() {
        let f = quadratic_objective(1, 0.0);
        let c = cfg(
            EstimatorKind::ZoTwoPoint,
            1,
            100,
            StepSize::Fixed(10.0),
            0.1,
        );
        let err = run(&f, &c, &[]).unwrap_err();
        match &err {
            OptimizerError::Diverged { at, trace } => {
                assert_eq!(trace.records.len(), *at);
                assert_eq!(trace.stopped_at, Some(*at));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_configs() {
        let f = quadratic_objective(2, 0.0);
        let mut c = cfg(EstimatorKind::PsgdU, 2, 0, StepSize::Fixed(0.1), 0.1);
        assert!(matches!(
            run(&f, &c, &[]),
            Err(OptimizerError::InvalidConfig(_))
        ));
        c.iterations = 5;
        c.x0 = vec![1.0];
        assert!(matches!(
            run(&f, &c, &[]),
            Err(OptimizerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn step_size_serde() {
        let s: StepSize = serde_json::from_str("\"theorem\"").unwrap();
        assert_eq!(s, StepSize::Theorem);
        let s: StepSize = serde_json::from_str("0.25").unwrap();
        assert_eq!(s, StepSize::Fixed(0.25));
        assert!(serde_json::from_str::<StepSize>("\"fast\"").is_err());
        assert_eq!(
            serde_json::to_string(&StepSize::Theorem).unwrap(),
            "\"theorem\""
        );
    }

    #[test]
    fn sign_run_on_quadratic_regression() {
        // The step length is eta * d / delta = 5 at every iteration, so the
        // iterate settles on a shell of radius ~ 5 / (2 c_5) rather than near
        // the minimizer; this pins the value rather than a convergence bound.
        use crate::diagnostics::grad_norm_metric;
        use std::sync::Arc;
        let obj = Arc::new(quadratic_objective(5, 0.0));
        let metric = grad_norm_metric(obj.clone()).unwrap();
        let mut c = cfg(EstimatorKind::PsgdU, 5, 10_000, StepSize::Theorem, 0.01);
        c.seed = 0;
        let tr = run(obj.as_ref(), &c, &[metric]).unwrap();
        let last = tr.metric_series("grad_norm").unwrap()[10_000];
        assert!((last - 8.245_858_848_574_06).abs() < 1e-9, "{last}");
    }
}
