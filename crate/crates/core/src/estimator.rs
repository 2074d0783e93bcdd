//! Two-point gradient estimators.
//!
//! All three estimators query the oracle at `x + delta * u` and `x` and
//! return `scale * feedback * u`:
//!
//! | kind            | direction `u`          | feedback                      |
//! |-----------------|------------------------|-------------------------------|
//! | `psgd_u`        | uniform on unit sphere | `sgn(f(x + delta u) - f(x))`  |
//! | `psgd_g`        | standard normal        | `sgn(f(x + delta u) - f(x))`  |
//! | `zo_two_point`  | uniform on unit sphere | `f(x + delta u) - f(x)`       |
//!
//! The default scale is `d / delta`, which makes the `psgd_u` estimate have
//! norm exactly `d / delta` on every draw.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{ComparisonOutcome, OracleError, PairOracle, QueryStreams};
use crate::rng::{sample_gaussian, sample_unit_sphere, Direction, RngStream, SamplingError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("smoothing parameter must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("estimator configured as {configured:?} but called as {called:?}")]
    KindMismatch {
        configured: EstimatorKind,
        called: EstimatorKind,
    },
    #[error("point has dimension {actual}, estimator expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    PsgdU,
    PsgdG,
    ZoTwoPoint,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::PsgdU => "psgd_u",
            EstimatorKind::PsgdG => "psgd_g",
            EstimatorKind::ZoTwoPoint => "zo_two_point",
        }
    }

    pub fn uses_sign(self) -> bool {
        !matches!(self, EstimatorKind::ZoTwoPoint)
    }
}

/// Coefficient multiplying `feedback * u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    #[default]
    DimensionOverDelta,
    InverseDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub delta: f64,
    pub dimension: usize,
    #[serde(default)]
    pub coefficient: Coefficient,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, delta: f64, dimension: usize) -> Result<Self, EstimatorError> {
        let cfg = Self {
            kind,
            delta,
            dimension,
            coefficient: Coefficient::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(EstimatorError::InvalidDelta(self.delta));
        }
        if self.dimension == 0 {
            return Err(SamplingError::InvalidDimension(0).into());
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        match self.coefficient {
            Coefficient::DimensionOverDelta => self.dimension as f64 / self.delta,
            Coefficient::InverseDelta => 1.0 / self.delta,
        }
    }
}

/// What the oracle reported for one query pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Sign(ComparisonOutcome),
    Difference(f64),
}

impl Feedback {
    pub fn value(self) -> f64 {
        match self {
            Feedback::Sign(o) => o.value(),
            Feedback::Difference(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub scale: f64,
    pub feedback: Feedback,
    pub direction: Direction,
}

impl GradientEstimate {
    /// `g = scale * feedback * direction`, componentwise.
    pub fn assemble(scale: f64, feedback: Feedback, direction: Direction) -> Self {
        let c = scale * feedback.value();
        let g = direction.as_slice().iter().map(|u| c * u).collect();
        Self {
            g,
            scale,
            feedback,
            direction,
        }
    }
}

/// The per-trial randomness an estimator consumes.
#[derive(Debug, Clone)]
pub struct EstimatorStreams {
    pub perturbation: RngStream,
    /// Noise for the perturbed point `x + delta u`.
    pub noise_perturbed: RngStream,
    /// Noise for the current point `x`.
    pub noise_current: RngStream,
}

impl EstimatorStreams {
    pub fn derive(base_seed: u64, trial: u64, scope: &str) -> Self {
        use crate::rng::StreamRole::*;
        Self {
            perturbation: RngStream::derive(base_seed, trial, scope, Perturbation),
            noise_perturbed: RngStream::derive(base_seed, trial, scope, ObjectiveNoise1),
            noise_current: RngStream::derive(base_seed, trial, scope, ObjectiveNoise2),
        }
    }
}

/// Draws a direction for `cfg.kind` without querying the oracle.
pub fn sample_direction(
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<Direction, SamplingError> {
    match cfg.kind {
        EstimatorKind::PsgdU | EstimatorKind::ZoTwoPoint => sample_unit_sphere(rng, cfg.dimension),
        EstimatorKind::PsgdG => sample_gaussian(rng, cfg.dimension),
    }
}

/// Queries the oracle along a given direction and assembles the estimate.
pub fn estimate_along(
    oracle: &mut dyn PairOracle,
    t: usize,
    x: &[f64],
    cfg: &EstimatorConfig,
    direction: Direction,
    streams: &mut EstimatorStreams,
) -> Result<GradientEstimate, EstimatorError> {
    cfg.validate()?;
    if x.len() != cfg.dimension || direction.dimension() != cfg.dimension {
        return Err(EstimatorError::DimensionMismatch {
            expected: cfg.dimension,
            actual: if x.len() != cfg.dimension {
                x.len()
            } else {
                direction.dimension()
            },
        });
    }
    let probe: Vec<f64> = x
        .iter()
        .zip(direction.as_slice())
        .map(|(xi, ui)| xi + cfg.delta * ui)
        .collect();
    let q = QueryStreams {
        first: &mut streams.noise_perturbed,
        second: &mut streams.noise_current,
    };
    let feedback = if cfg.kind.uses_sign() {
        Feedback::Sign(oracle.compare(t, &probe, x, q)?)
    } else {
        Feedback::Difference(oracle.difference(t, &probe, x, q)?)
    };
    Ok(GradientEstimate::assemble(cfg.scale(), feedback, direction))
}

/// One estimate of the kind named in `cfg`.
pub fn estimate(
    oracle: &mut dyn PairOracle,
    t: usize,
    x: &[f64],
    cfg: &EstimatorConfig,
    streams: &mut EstimatorStreams,
) -> Result<GradientEstimate, EstimatorError> {
    cfg.validate()?;
    let direction = sample_direction(cfg, &mut streams.perturbation)?;
    estimate_along(oracle, t, x, cfg, direction, streams)
}

fn estimate_checked(
    called: EstimatorKind,
    oracle: &mut dyn PairOracle,
    x: &[f64],
    cfg: &EstimatorConfig,
    streams: &mut EstimatorStreams,
) -> Result<GradientEstimate, EstimatorError> {
    if cfg.kind != called {
        return Err(EstimatorError::KindMismatch {
            configured: cfg.kind,
            called,
        });
    }
    estimate(oracle, 0, x, cfg, streams)
}

/// Sign feedback along a uniform sphere direction.
pub fn estimate_psgd_u(
    oracle: &mut dyn PairOracle,
    x: &[f64],
    cfg: &EstimatorConfig,
    streams: &mut EstimatorStreams,
) -> Result<GradientEstimate, EstimatorError> {
    estimate_checked(EstimatorKind::PsgdU, oracle, x, cfg, streams)
}

/// Raw value difference along a uniform sphere direction.
pub fn estimate_zo_two_point(
    oracle: &mut dyn PairOracle,
    x: &[f64],
    cfg: &EstimatorConfig,
    streams: &mut EstimatorStreams,
) -> Result<GradientEstimate, EstimatorError> {
    estimate_checked(EstimatorKind::ZoTwoPoint, oracle, x, cfg, streams)
}

/// Sign feedback along an unnormalized Gaussian direction.
pub fn estimate_psgd_g(
    oracle: &mut dyn PairOracle,
    x: &[f64],
    cfg: &EstimatorConfig,
    streams: &mut EstimatorStreams,
) -> Result<GradientEstimate, EstimatorError> {
    estimate_checked(EstimatorKind::PsgdG, oracle, x, cfg, streams)
}
