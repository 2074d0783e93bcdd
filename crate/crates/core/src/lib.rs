//! Preference-based stochastic optimization from noisy pairwise comparisons.
//!
//! The optimizer only ever learns `sgn(f(x + delta u, xi) - f(x, zeta))` for a
//! random direction `u`, and steps against `(d / delta) * sign * u`. Two
//! baselines share the same query pattern: a zeroth-order estimator that sees
//! the raw difference, and a sign estimator with Gaussian directions.
//!
//! Modules:
//! - [`rng`]: seeded streams and direction samplers
//! - [`oracle`]: objectives, the comparison oracle, the interactive oracle
//! - [`estimator`]: the three two-point gradient estimators
//! - [`optimizer`]: the SGD loop and step-size schedule
//! - [`lqg`]: the scalar discounted LQG benchmark
//! - [`diagnostics`]: metrics, rate fits, `c_d` estimation
//! - [`harness`]: multi-trial experiments, tuning, output files

pub mod diagnostics;
pub mod estimator;
pub mod harness;
pub mod lqg;
pub mod optimizer;
pub mod oracle;
pub mod rng;
