use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::MetricDef;
use crate::estimator::{EstimatorConfig, EstimatorKind, EstimatorStreams};
use crate::optimizer::{run_with_oracle, OptimizerConfig, OptimizerError, TrialTrace};
use crate::oracle::ObjectiveOracle;
use crate::rng::GENERATOR_ID;

use super::config::{ExperimentConfig, MethodConfig};
use super::problem::Problem;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
    pub generator: String,
    pub stream_keys: String,
    pub build: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub mean: Vec<f64>,
    /// Population standard deviation across non-diverged trials.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub x0: Vec<f64>,
    pub final_x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    /// Metric values at `t = 0`, in the experiment's metric order.
    pub initial: Vec<f64>,
    /// Metric values at the last recorded row.
    #[serde(rename = "final")]
    pub last: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub id: String,
    pub estimator: EstimatorKind,
    /// Resolved step size.
    pub eta: f64,
    pub delta: f64,
    #[serde(skip)]
    pub series: Vec<MetricSeries>,
    pub trials: Vec<TrialSummary>,
    pub diverged_trials: Vec<usize>,
}

impl MethodAggregate {
    pub fn series(&self, metric: &str) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.name == metric)
    }

    fn metric_index(&self, metrics: &[String], metric: &str) -> Option<usize> {
        metrics.iter().position(|m| m == metric)
    }

    /// Last mean value of a metric.
    pub fn final_mean(&self, metric: &str) -> Option<f64> {
        self.series(metric).and_then(|s| s.mean.last().copied())
    }

    fn per_trial(
        &self,
        metrics: &[String],
        metric: &str,
        pick: fn(&TrialSummary) -> &[f64],
    ) -> Vec<f64> {
        let Some(i) = self.metric_index(metrics, metric) else {
            return Vec::new();
        };
        self.trials
            .iter()
            .filter(|t| t.diverged_at.is_none())
            .map(|t| pick(t)[i])
            .collect()
    }

    /// Per-trial final values of a metric, non-diverged trials only.
    pub fn final_values(&self, metrics: &[String], metric: &str) -> Vec<f64> {
        self.per_trial(metrics, metric, |t| &t.last)
    }

    /// Per-trial initial values of a metric, non-diverged trials only.
    pub fn initial_values(&self, metrics: &[String], metric: &str) -> Vec<f64> {
        self.per_trial(metrics, metric, |t| &t.initial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub metric_names: Vec<String>,
    pub methods: Vec<MethodAggregate>,
}

impl AggregateResult {
    pub fn method(&self, id: &str) -> Option<&MethodAggregate> {
        self.methods.iter().find(|m| m.id == id)
    }

    pub fn diverged_total(&self) -> usize {
        self.methods.iter().map(|m| m.diverged_trials.len()).sum()
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.m2 / self.n as f64).max(0.0).sqrt()
    }
}

pub(crate) fn optimizer_config(
    method: &MethodConfig,
    dimension: usize,
    iterations: usize,
    x0: Vec<f64>,
    base_seed: u64,
) -> OptimizerConfig {
    OptimizerConfig {
        iterations,
        step: method.eta,
        estimator: EstimatorConfig {
            kind: method.estimator,
            delta: method.delta,
            dimension,
            coefficient: method.coefficient,
        },
        x0,
        seed: base_seed,
    }
}

/// Runs one `(method, trial)` cell.
///
/// Streams are keyed by `(base_seed, trial, method id)`, and the starting
/// point by `(base_seed, trial)` alone, so every method of a trial starts
/// from the same point.
pub fn run_method_trial(
    problem: &Problem,
    cfg: &ExperimentConfig,
    method: &MethodConfig,
    trial: usize,
    metrics: &[MetricDef],
) -> Result<TrialTrace, OptimizerError> {
    let x0 = problem.initial_point(cfg.base_seed, trial as u64);
    let opt = optimizer_config(
        method,
        problem.config.dimension(),
        cfg.optimizer_t,
        x0,
        cfg.base_seed,
    );
    let mut streams = EstimatorStreams::derive(cfg.base_seed, trial as u64, method.id());
    let mut oracle = ObjectiveOracle::new(problem.objective.as_ref());
    run_with_oracle(&mut oracle, &opt, metrics, &mut streams)
}

/// Runs every `(method, trial)` pair and aggregates; methods whose trials
/// all diverged come back with empty series.
pub(crate) fn execute(cfg: &ExperimentConfig) -> Result<AggregateResult, HarnessError> {
    cfg.validate()?;
    let problem = Problem::build(&cfg.problem)?;
    let metric_names = cfg.metric_names();
    let metrics = problem.metrics(&metric_names)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    let outcomes: Vec<Result<TrialTrace, OptimizerError>> = jobs
        .par_iter()
        .map(|&(m, t)| run_method_trial(&problem, cfg, &cfg.methods[m], t, &metrics))
        .collect();

    let mut methods = Vec::with_capacity(cfg.methods.len());
    let mut outcomes = outcomes.into_iter();
    for method in &cfg.methods {
        let mut trials = Vec::with_capacity(cfg.trials);
        let mut diverged = Vec::new();
        let mut acc = vec![vec![Welford::default(); metric_names.len()]; cfg.optimizer_t + 1];
        for trial in 0..cfg.trials {
            let outcome = outcomes.next().expect("one outcome per job");
            let (trace, diverged_at) = match outcome {
                Ok(trace) => (trace, None),
                Err(OptimizerError::Diverged { at, trace }) => (*trace, Some(at)),
                Err(e) => return Err(e.into()),
            };
            if diverged_at.is_some() {
                diverged.push(trial);
            } else {
                for (row, slots) in trace.records.iter().zip(acc.iter_mut()) {
                    for (v, w) in row.metrics.iter().zip(slots.iter_mut()) {
                        w.push(*v);
                    }
                }
            }
            let first = trace
                .records
                .first()
                .map(|r| r.metrics.clone())
                .unwrap_or_default();
            let last = trace
                .records
                .last()
                .map(|r| r.metrics.clone())
                .unwrap_or_default();
            trials.push(TrialSummary {
                trial,
                x0: trace.config.x0.clone(),
                final_x: trace.final_x.clone(),
                diverged_at,
                initial: first,
                last,
            });
        }
        let series = if diverged.len() == cfg.trials {
            Vec::new()
        } else {
            metric_names
                .iter()
                .enumerate()
                .map(|(i, name)| MetricSeries {
                    name: name.clone(),
                    mean: acc.iter().map(|slots| slots[i].mean).collect(),
                    std: acc.iter().map(|slots| slots[i].std()).collect(),
                })
                .collect()
        };
        methods.push(MethodAggregate {
            id: method.id().to_string(),
            estimator: method.estimator,
            eta: method.eta.resolve(cfg.optimizer_t),
            delta: method.delta,
            series,
            trials,
            diverged_trials: diverged,
        });
    }

    Ok(AggregateResult {
        config: cfg.clone(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            base_seed: cfg.base_seed,
            generator: GENERATOR_ID.to_string(),
            stream_keys:
                "(base_seed, trial, method id, role); initial point (base_seed, trial, \"\", init)"
                    .to_string(),
            build: concat!("prefopt ", env!("CARGO_PKG_VERSION")).to_string(),
        },
        metric_names,
        methods,
    })
}

/// Runs the experiment and aggregates mean and standard deviation across
/// trials. Diverged trials are excluded from the aggregates and listed per
/// method; a method with no surviving trial is an error.
///
/// Nothing is written to disk; see [`super::emit_outputs`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult, HarnessError> {
    let result = execute(cfg)?;
    if let Some(m) = result
        .methods
        .iter()
        .find(|m| m.diverged_trials.len() == cfg.trials)
    {
        return Err(HarnessError::AllDiverged {
            method: m.id.clone(),
        });
    }
    Ok(result)
}
