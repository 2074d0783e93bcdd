//! Per-iteration metrics and convergence-checking utilities.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::optimizer::TrialTrace;
use crate::oracle::StochasticObjective;
use crate::rng::{norm, sample_unit_sphere, RngStream, SamplingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("metric {metric} needs {needs}, which the objective does not provide")]
    UnsupportedMetric { metric: String, needs: &'static str },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown metric {0}")]
    UnknownMetric(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

type MetricFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A named, side-effect-free function of the current iterate.
#[derive(Clone)]
pub struct MetricDef {
    name: String,
    dimension: Option<usize>,
    compute: Arc<MetricFn>,
}

impl fmt::Debug for MetricDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricDef")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

impl MetricDef {
    pub fn new(
        name: impl Into<String>,
        dimension: Option<usize>,
        compute: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dimension,
            compute: Arc::new(compute),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Dimension the metric was built for, if it is fixed.
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    /// Evaluates without checking the dimension.
    pub fn compute(&self, x: &[f64]) -> f64 {
        (self.compute)(x)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, DiagnosticsError> {
        if let Some(d) = self.dimension {
            if d != x.len() {
                return Err(DiagnosticsError::DimensionMismatch {
                    expected: d,
                    actual: x.len(),
                });
            }
        }
        Ok(self.compute(x))
    }
}

pub const GRAD_NORM: &str = "grad_norm";
pub const PARAM_ERROR: &str = "param_error";
pub const COST_ERROR: &str = "cost_error";

/// `||grad F(x)||`.
pub fn grad_norm_metric(obj: Arc<dyn StochasticObjective>) -> Result<MetricDef, DiagnosticsError> {
    let d = obj.dimension();
    if obj.expected_gradient(&vec![0.0; d]).is_none() {
        return Err(DiagnosticsError::UnsupportedMetric {
            metric: GRAD_NORM.into(),
            needs: "expected_gradient",
        });
    }
    Ok(MetricDef::new(GRAD_NORM, Some(d), move |x| {
        obj.expected_gradient(x).map_or(f64::NAN, |g| norm(&g))
    }))
}

/// `||x - target||`.
pub fn param_error_metric(target: Vec<f64>) -> MetricDef {
    let d = target.len();
    MetricDef::new(PARAM_ERROR, Some(d), move |x| {
        x.iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

/// `|F(x) - target_value|`.
pub fn cost_error_metric(
    obj: Arc<dyn StochasticObjective>,
    target_value: f64,
) -> Result<MetricDef, DiagnosticsError> {
    let d = obj.dimension();
    if obj.expected_value(&vec![0.0; d]).is_none() {
        return Err(DiagnosticsError::UnsupportedMetric {
            metric: COST_ERROR.into(),
            needs: "expected_value",
        });
    }
    Ok(MetricDef::new(COST_ERROR, Some(d), move |x| {
        obj.expected_value(x)
            .map_or(f64::NAN, |v| (v - target_value).abs())
    }))
}

/// Minimum number of points in a single-budget slope fit.
pub const MIN_SLOPE_POINTS: usize = 10;

/// Running averages `(1/t) sum_{s=1}^{t} a_s` for `t = 1..len`, where
/// `series[0]` is the value at the initial point and is skipped.
pub fn running_average(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .skip(1)
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Log-log slope of the running-average metric.
///
/// When every trace has the same budget, the metric is averaged across
/// traces per iteration and the slope of `log R_t` against `log t` is fitted
/// over the second half of the iterations (at least [`MIN_SLOPE_POINTS`]).
///
/// When traces come at two or more distinct budgets `T`, each budget
/// contributes one point `(log T, log mean_over_traces R_T)`, which measures
/// how the whole-run average scales with the budget.
pub fn rate_slope(traces: &[TrialTrace], metric: &str) -> Result<f64, DiagnosticsError> {
    if traces.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no traces".into()));
    }
    let mut by_budget: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for tr in traces {
        let series = tr
            .metric_series(metric)
            .ok_or_else(|| DiagnosticsError::UnknownMetric(metric.to_string()))?;
        if series.len() < 2 {
            return Err(DiagnosticsError::InsufficientData(
                "trace shorter than two rows".into(),
            ));
        }
        by_budget.entry(series.len() - 1).or_default().push(series);
    }

    if by_budget.len() == 1 {
        let group = by_budget.into_values().next().unwrap_or_default();
        let averaged = mean_series(&group);
        single_budget_slope(&averaged)
    } else {
        let (xs, ys): (Vec<f64>, Vec<f64>) = by_budget
            .iter()
            .map(|(budget, group)| {
                let finals: f64 = group
                    .iter()
                    .map(|s| *running_average(s).last().unwrap_or(&f64::NAN))
                    .sum::<f64>()
                    / group.len() as f64;
                ((*budget as f64).ln(), finals.ln())
            })
            .unzip();
        Ok(least_squares_slope(&xs, &ys))
    }
}

/// Slope over the second half of one averaged metric sequence.
pub fn single_budget_slope(series: &[f64]) -> Result<f64, DiagnosticsError> {
    let avg = running_average(series);
    let n = avg.len();
    let start = n / 2;
    if n - start < MIN_SLOPE_POINTS {
        return Err(DiagnosticsError::InsufficientData(format!(
            "{} points in the second half, need {MIN_SLOPE_POINTS}",
            n - start
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = avg[start..]
        .iter()
        .enumerate()
        .map(|(i, r)| (((start + i + 1) as f64).ln(), r.ln()))
        .unzip();
    Ok(least_squares_slope(&xs, &ys))
}

fn mean_series(group: &[Vec<f64>]) -> Vec<f64> {
    let len = group[0].len();
    (0..len)
        .map(|t| group.iter().map(|s| s[t]).sum::<f64>() / group.len() as f64)
        .collect()
}

/// Smallest sample count accepted by [`estimate_cd`].
pub const MIN_CD_SAMPLES: usize = 10_000;

/// Monte Carlo estimate of `E|u_1|` for `u` uniform on the unit sphere of `R^d`.
pub fn estimate_cd(
    d: usize,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<f64, DiagnosticsError> {
    if n_samples < MIN_CD_SAMPLES {
        return Err(DiagnosticsError::InsufficientData(format!(
            "{n_samples} samples, need at least {MIN_CD_SAMPLES}"
        )));
    }
    let mut acc = 0.0;
    for _ in 0..n_samples {
        acc += sample_unit_sphere(rng, d)?.as_slice()[0].abs();
    }
    Ok(acc / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{EstimatorConfig, EstimatorKind};
    use crate::optimizer::{OptimizerConfig, StepSize, TraceRecord};
    use crate::oracle::quadratic_objective;

    fn synthetic_trace(series: &[f64]) -> TrialTrace {
        TrialTrace {
            config: OptimizerConfig {
                iterations: series.len() - 1,
                step: StepSize::Theorem,
                estimator: EstimatorConfig::new(EstimatorKind::PsgdU, 0.1, 1).unwrap(),
                x0: vec![0.0],
                seed: 0,
            },
            metric_names: vec!["m".into()],
            records: series
                .iter()
                .enumerate()
                .map(|(t, v)| TraceRecord {
                    t,
                    x: vec![0.0],
                    metrics: vec![*v],
                    feedback: None,
                })
                .collect(),
            final_x: vec![0.0],
            stopped_at: None,
        }
    }

    struct Opaque;
    impl StochasticObjective for Opaque {
        fn dimension(&self) -> usize {
            2
        }
        fn evaluate(&self, x: &[f64], _rng: &mut RngStream) -> f64 {
            x[0]
        }
    }

    #[test]
    fn grad_norm_values() {
        let m = grad_norm_metric(Arc::new(quadratic_objective(2, 0.0))).unwrap();
        assert!((m.evaluate(&[3.0, 4.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(m.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn unsupported_metrics() {
        assert!(matches!(
            grad_norm_metric(Arc::new(Opaque)),
            Err(DiagnosticsError::UnsupportedMetric { .. })
        ));
        assert!(matches!(
            cost_error_metric(Arc::new(Opaque), 0.0),
            Err(DiagnosticsError::UnsupportedMetric { .. })
        ));
    }

    #[test]
    fn param_error_values() {
        let m = param_error_metric(vec![1.0, 1.0]);
        assert_eq!(m.evaluate(&[1.0, 1.0]).unwrap(), 0.0);
        assert!((m.evaluate(&[4.0, 5.0]).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(
            m.evaluate(&[1.0]),
            Err(DiagnosticsError::DimensionMismatch { .. })
        ));
        let k = param_error_metric(vec![-0.4]);
        assert!((k.evaluate(&[0.6]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cost_error_at_target_is_zero() {
        let m = cost_error_metric(Arc::new(quadratic_objective(2, 0.0)), 25.0).unwrap();
        assert_eq!(m.evaluate(&[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(m.evaluate(&[0.0, 0.0]).unwrap(), 25.0);
    }

    #[test]
    fn power_law_slope() {
        let series: Vec<f64> = (0..=10_000).map(|t| (t.max(1) as f64).powf(-0.5)).collect();
        let s = rate_slope(&[synthetic_trace(&series)], "m").unwrap();
        assert!((s + 0.5).abs() < 0.01, "{s}");
    }

    #[test]
    fn constant_slope() {
        let series = vec![3.0; 500];
        let s = rate_slope(&[synthetic_trace(&series)], "m").unwrap();
        assert!(s.abs() < 0.01, "{s}");
    }

    #[test]
    fn budget_mode_slope() {
        // Whole-run averages of a_t = c / sqrt(T) are c / sqrt(T) exactly.
        let traces: Vec<TrialTrace> = [100usize, 400, 1600]
            .iter()
            .map(|&budget| synthetic_trace(&vec![(budget as f64).powf(-0.5); budget + 1]))
            .collect();
        let s = rate_slope(&traces, "m").unwrap();
        assert!((s + 0.5).abs() < 1e-12, "{s}");
    }

    #[test]
    fn slope_needs_data() {
        let series = vec![1.0; 12];
        assert!(matches!(
            rate_slope(&[synthetic_trace(&series)], "m"),
            Err(DiagnosticsError::InsufficientData(_))
        ));
        assert!(matches!(
            rate_slope(&[synthetic_trace(&vec![1.0; 100])], "other"),
            Err(DiagnosticsError::UnknownMetric(_))
        ));
        assert!(rate_slope(&[], "m").is_err());
    }

    #[test]
    fn cd_in_one_dimension_is_one() {
        let mut rng = RngStream::from_seed(0);
        assert_eq!(estimate_cd(1, MIN_CD_SAMPLES, &mut rng).unwrap(), 1.0);
        assert!(estimate_cd(3, 10, &mut rng).is_err());
    }

    #[test]
    fn cd_decreases_with_dimension() {
        let mut rng = RngStream::from_seed(1);
        let c2 = estimate_cd(2, 200_000, &mut rng).unwrap();
        let c5 = estimate_cd(5, 200_000, &mut rng).unwrap();
        let c20 = estimate_cd(20, 200_000, &mut rng).unwrap();
        assert!(c2 > c5 && c5 > c20, "{c2} {c5} {c20}");
    }
}
