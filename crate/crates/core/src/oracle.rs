//! Stochastic objectives and the pairwise comparison oracle.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("trial aborted after {attempts} unusable responses")]
    Aborted { attempts: usize },
    #[error("this oracle only reports comparisons, not function values")]
    ValuesUnavailable,
    #[error("oracle i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// A noisy objective `f(x, xi)` with optional analytic expectations.
pub trait StochasticObjective: Send + Sync {
    fn dimension(&self) -> usize;

    /// One noisy sample `f(x, xi)`, with `xi` drawn from `rng`.
    fn evaluate(&self, x: &[f64], rng: &mut RngStream) -> f64;

    /// `F(x) = E f(x, xi)` when known.
    fn expected_value(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// `grad F(x)` when known.
    fn expected_gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Sign feedback in `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonOutcome {
    /// The first point scored higher, or the scores tied.
    Plus,
    /// The first point scored strictly lower.
    Minus,
}

impl ComparisonOutcome {
    /// `sgn(diff)` with `sgn(0) = +1`.
    pub fn from_difference(diff: f64) -> Self {
        if diff < 0.0 {
            ComparisonOutcome::Minus
        } else {
            ComparisonOutcome::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            ComparisonOutcome::Plus => 1.0,
            ComparisonOutcome::Minus => -1.0,
        }
    }
}

impl fmt::Display for ComparisonOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComparisonOutcome::Plus => f.write_str("+1"),
            ComparisonOutcome::Minus => f.write_str("-1"),
        }
    }
}

fn check_dimension(expected: usize, x: &[f64]) -> Result<(), OracleError> {
    if x.len() != expected {
        return Err(OracleError::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Raw difference `f(x1, xi) - f(x2, zeta)`, one evaluation per stream.
pub fn evaluate_difference(
    obj: &dyn StochasticObjective,
    x1: &[f64],
    x2: &[f64],
    rng1: &mut RngStream,
    rng2: &mut RngStream,
) -> Result<f64, OracleError> {
    check_dimension(obj.dimension(), x1)?;
    check_dimension(obj.dimension(), x2)?;
    let f1 = obj.evaluate(x1, rng1);
    let f2 = obj.evaluate(x2, rng2);
    Ok(f1 - f2)
}

/// `sgn(f(x1, xi) - f(x2, zeta))` with the tie rule `sgn(0) = +1`.
pub fn compare(
    obj: &dyn StochasticObjective,
    x1: &[f64],
    x2: &[f64],
    rng1: &mut RngStream,
    rng2: &mut RngStream,
) -> Result<ComparisonOutcome, OracleError> {
    evaluate_difference(obj, x1, x2, rng1, rng2).map(ComparisonOutcome::from_difference)
}

/// The noise streams consumed by one two-point query.
#[derive(Debug)]
pub struct QueryStreams<'a> {
    pub first: &'a mut RngStream,
    pub second: &'a mut RngStream,
}

/// Anything that can answer the two-point queries of the optimizer.
///
/// `t` is the iteration index, used only for display and logging.
pub trait PairOracle {
    fn dimension(&self) -> usize;

    fn compare(
        &mut self,
        t: usize,
        x1: &[f64],
        x2: &[f64],
        streams: QueryStreams<'_>,
    ) -> Result<ComparisonOutcome, OracleError>;

    /// Raw value difference, needed by the zeroth-order baseline.
    fn difference(
        &mut self,
        t: usize,
        x1: &[f64],
        x2: &[f64],
        streams: QueryStreams<'_>,
    ) -> Result<f64, OracleError>;
}

/// Answers queries by sampling a [`StochasticObjective`].
pub struct ObjectiveOracle<'a> {
    obj: &'a dyn StochasticObjective,
}

impl<'a> ObjectiveOracle<'a> {
    pub fn new(obj: &'a dyn StochasticObjective) -> Self {
        Self { obj }
    }
}

impl PairOracle for ObjectiveOracle<'_> {
    fn dimension(&self) -> usize {
        self.obj.dimension()
    }

    fn compare(
        &mut self,
        _t: usize,
        x1: &[f64],
        x2: &[f64],
        streams: QueryStreams<'_>,
    ) -> Result<ComparisonOutcome, OracleError> {
        compare(self.obj, x1, x2, streams.first, streams.second)
    }

    fn difference(
        &mut self,
        _t: usize,
        x1: &[f64],
        x2: &[f64],
        streams: QueryStreams<'_>,
    ) -> Result<f64, OracleError> {
        evaluate_difference(self.obj, x1, x2, streams.first, streams.second)
    }
}

/// `f(x, xi) = ||x||^2 + xi`, `xi ~ N(0, noise_std^2)`.
///
/// Smoothness `L = 2`, gradient noise `sigma = 0`, value noise `sigma_f = noise_std`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    dimension: usize,
    noise_std: f64,
}

pub fn quadratic_objective(d: usize, noise_std: f64) -> Quadratic {
    Quadratic {
        dimension: d,
        noise_std,
    }
}

impl Quadratic {
    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

impl StochasticObjective for Quadratic {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngStream) -> f64 {
        let xi = rng.normal(self.noise_std);
        x.iter().map(|v| v * v).sum::<f64>() + xi
    }

    fn expected_value(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|v| v * v).sum())
    }

    fn expected_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().map(|v| 2.0 * v).collect())
    }
}

/// `f(x, xi) = sum_i (x_i^2 + cos(3 x_i)) + xi`.
///
/// Smooth with `L <= 11` and a stationary point at the origin plus two more
/// per coordinate.
#[derive(Debug, Clone)]
pub struct Nonconvex {
    dimension: usize,
    noise_std: f64,
}

pub fn nonconvex_objective(d: usize, noise_std: f64) -> Nonconvex {
    Nonconvex {
        dimension: d,
        noise_std,
    }
}

impl Nonconvex {
    /// Minimum of the per-coordinate term `x^2 + cos(3x)`, located by
    /// golden-section search on `[0.5, 1.5]`.
    pub fn coordinate_minimum() -> (f64, f64) {
        let term = |x: f64| x * x + (3.0 * x).cos();
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.5, 1.5);
        while b - a > 1e-12 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if term(c) < term(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let x = 0.5 * (a + b);
        (x, term(x))
    }

    /// Global minimum of the expected objective.
    pub fn minimum_value(&self) -> f64 {
        self.dimension as f64 * Self::coordinate_minimum().1
    }
}

impl StochasticObjective for Nonconvex {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngStream) -> f64 {
        let xi = rng.normal(self.noise_std);
        self.expected_value(x).unwrap_or_default() + xi
    }

    fn expected_value(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|v| v * v + (3.0 * v).cos()).sum())
    }

    fn expected_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().map(|v| 2.0 * v - 3.0 * (3.0 * v).sin()).collect())
    }
}

/// Wraps an objective and counts `evaluate` calls.
pub struct CountingObjective<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O: StochasticObjective> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<O: StochasticObjective> StochasticObjective for CountingObjective<O> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngStream) -> f64 {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(x, rng)
    }

    fn expected_value(&self, x: &[f64]) -> Option<f64> {
        self.inner.expected_value(x)
    }

    fn expected_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.expected_gradient(x)
    }
}

/// Unusable responses tolerated before a trial is aborted.
pub const MAX_ATTEMPTS: usize = 3;

/// One logged human answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub t: usize,
    pub unix_millis: u128,
    pub raw: String,
    pub outcome: Option<ComparisonOutcome>,
}

/// Comparison oracle backed by a person at a terminal.
///
/// Prints a `t=<iter> | A: f(<x1>) vs B: f(<x2>) ... [A/B]` prompt and reads
/// one line. `A` means `x1` is better (lower cost), giving `-1`; `B` gives
/// `+1`. `q` or end of input aborts immediately.
pub struct InteractiveOracle<R, W> {
    dimension: usize,
    input: R,
    output: W,
    log: Vec<ResponseRecord>,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(dimension: usize, input: R, output: W) -> Self {
        Self {
            dimension,
            input,
            output,
            log: Vec::new(),
        }
    }

    pub fn log(&self) -> &[ResponseRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<ResponseRecord> {
        self.log
    }

    fn record(&mut self, t: usize, raw: &str, outcome: Option<ComparisonOutcome>) {
        let unix_millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        self.log.push(ResponseRecord {
            t,
            unix_millis,
            raw: raw.to_string(),
            outcome,
        });
    }

    fn ask(&mut self, t: usize, x1: &[f64], x2: &[f64]) -> Result<ComparisonOutcome, OracleError> {
        check_dimension(self.dimension, x1)?;
        check_dimension(self.dimension, x2)?;
        for attempt in 1..=MAX_ATTEMPTS {
            writeln!(
                self.output,
                "t={t} | A: f({}) vs B: f({}) — better? [A/B]",
                format_point(x1),
                format_point(x2)
            )?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                self.record(t, "", None);
                return Err(OracleError::Aborted { attempts: attempt });
            }
            let answer = line.trim();
            let outcome = match answer {
                "A" | "a" => Some(ComparisonOutcome::Minus),
                "B" | "b" => Some(ComparisonOutcome::Plus),
                _ => None,
            };
            self.record(t, answer, outcome);
            match (outcome, answer) {
                (Some(o), _) => return Ok(o),
                (None, "q" | "Q") => return Err(OracleError::Aborted { attempts: attempt }),
                (None, _) => {
                    if attempt < MAX_ATTEMPTS {
                        writeln!(self.output, "please answer A or B (q to quit)")?;
                    }
                }
            }
        }
        Err(OracleError::Aborted {
            attempts: MAX_ATTEMPTS,
        })
    }
}

fn format_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    parts.join(", ")
}

impl<R: BufRead, W: Write> PairOracle for InteractiveOracle<R, W> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn compare(
        &mut self,
        t: usize,
        x1: &[f64],
        x2: &[f64],
        _streams: QueryStreams<'_>,
    ) -> Result<ComparisonOutcome, OracleError> {
        self.ask(t, x1, x2)
    }

    fn difference(
        &mut self,
        _t: usize,
        _x1: &[f64],
        _x2: &[f64],
        _streams: QueryStreams<'_>,
    ) -> Result<f64, OracleError> {
        Err(OracleError::ValuesUnavailable)
    }
}
