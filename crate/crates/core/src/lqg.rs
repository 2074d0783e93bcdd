//! Scalar discounted LQG benchmark.
//!
//! Plant `x_{k+1} = A x_k + B u_k + w_k` with `u_k = K x_k` and
//! `w_k ~ N(0, sigma^2)`. The cost of a gain is the discounted sum
//! `V(K) = sum_{t=0}^{H} gamma^t (Q x_t^2 + R u_t^2)`.
//!
//! The reference gain comes from the infinite-horizon discounted Riccati
//! equation. With `H = 50` and `gamma = 0.7` the finite-horizon optimum
//! differs from it by a term of order `gamma^H < 2e-8`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::StochasticObjective;
use crate::rng::RngStream;

/// Rollout costs are clipped here so unstable gains still compare.
pub const COST_CAP: f64 = 1e12;

/// Step of the central difference used for `expected_gradient`.
pub const FD_STEP: f64 = 1e-6;

const RICCATI_TOL: f64 = 1e-12;
const RICCATI_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LqgError {
    #[error("invalid LQG system: {0}")]
    InvalidSystem(String),
    #[error("Riccati iteration did not converge after {0} iterations")]
    RiccatiDiverged(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqgSystem {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    /// Standard deviation of the process noise.
    pub noise_std: f64,
    /// Number of transitions in one rollout; the cost sums `horizon + 1` terms.
    pub horizon: usize,
    pub x0_state: f64,
}

impl LqgSystem {
    /// `A = 1.1, B = 0.1, Q = R = 1, gamma = 0.7`, horizon 50, `x_0 = 1`.
    pub fn benchmark(noise_std: f64) -> Self {
        Self {
            a: 1.1,
            b: 0.1,
            q: 1.0,
            r: 1.0,
            gamma: 0.7,
            noise_std,
            horizon: 50,
            x0_state: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), LqgError> {
        let finite = [
            self.a,
            self.b,
            self.q,
            self.r,
            self.gamma,
            self.noise_std,
            self.x0_state,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(LqgError::InvalidSystem("parameters must be finite".into()));
        }
        if self.q <= 0.0 || self.r <= 0.0 {
            return Err(LqgError::InvalidSystem("Q and R must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(LqgError::InvalidSystem("gamma must lie in (0, 1)".into()));
        }
        if self.noise_std < 0.0 {
            return Err(LqgError::InvalidSystem(
                "noise_std must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn closed_loop(&self, k: f64) -> f64 {
        self.a + self.b * k
    }

    fn stage_weight(&self, k: f64) -> f64 {
        self.q + self.r * k * k
    }
}

/// Static state-feedback gain `u = K x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyGain(pub f64);

impl PolicyGain {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// One noisy sample of `V(K)`, capped at [`COST_CAP`].
pub fn rollout_cost(sys: &LqgSystem, k: PolicyGain, rng: &mut RngStream) -> f64 {
    let k = k.0;
    let a_cl = sys.closed_loop(k);
    let weight = sys.stage_weight(k);
    let mut x = sys.x0_state;
    let mut discount = 1.0;
    let mut cost = 0.0;
    for t in 0..=sys.horizon {
        cost += discount * weight * x * x;
        if cost.is_nan() || cost >= COST_CAP {
            return COST_CAP;
        }
        if t < sys.horizon {
            x = a_cl * x + rng.normal(sys.noise_std);
            discount *= sys.gamma;
        }
    }
    cost
}

/// `E V(K)` from the second-moment recursion `m_{t+1} = (A + BK)^2 m_t + sigma^2`.
pub fn expected_cost(sys: &LqgSystem, k: PolicyGain) -> f64 {
    let k = k.0;
    let a2 = sys.closed_loop(k).powi(2);
    let weight = sys.stage_weight(k);
    let var = sys.noise_std * sys.noise_std;
    let mut m = sys.x0_state * sys.x0_state;
    let mut discount = 1.0;
    let mut total = 0.0;
    for _ in 0..=sys.horizon {
        total += discount * weight * m;
        m = a2 * m + var;
        discount *= sys.gamma;
    }
    total
}

/// Fixed point of the scalar discounted Riccati equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiSolution {
    pub p: f64,
    pub gain: PolicyGain,
    pub iterations: usize,
}

/// Iterates `P <- Q + gamma A^2 P - gamma^2 A^2 B^2 P^2 / (R + gamma B^2 P)`
/// from `P = Q` and returns `K* = -gamma A B P / (R + gamma B^2 P)`.
pub fn solve_riccati(sys: &LqgSystem) -> Result<RiccatiSolution, LqgError> {
    sys.validate()?;
    let (a, b, q, r, g) = (sys.a, sys.b, sys.q, sys.r, sys.gamma);
    let mut p = q;
    for i in 1..=RICCATI_MAX_ITER {
        let denom = r + g * b * b * p;
        let next = q + g * a * a * p - (g * a * b * p).powi(2) / denom;
        if !next.is_finite() {
            return Err(LqgError::RiccatiDiverged(i));
        }
        let done = (next - p).abs() < RICCATI_TOL;
        p = next;
        if done {
            let k = -g * a * b * p / (r + g * b * b * p);
            return Ok(RiccatiSolution {
                p,
                gain: PolicyGain(k),
                iterations: i,
            });
        }
    }
    Err(LqgError::RiccatiDiverged(RICCATI_MAX_ITER))
}

pub fn riccati_optimal_gain(sys: &LqgSystem) -> Result<PolicyGain, LqgError> {
    solve_riccati(sys).map(|s| s.gain)
}

/// `K_0 = K* + offset`, `offset` in `[0, 1]`.
pub fn shift_gain(kstar: PolicyGain, offset: f64) -> PolicyGain {
    debug_assert!((0.0..=1.0).contains(&offset));
    PolicyGain(kstar.0 + offset)
}

/// `K_0 = K* + U`, `U ~ Uniform[0, 1)`.
pub fn perturbed_init(kstar: PolicyGain, rng: &mut RngStream) -> PolicyGain {
    shift_gain(kstar, rng.uniform())
}

/// `V(K)` as a one-dimensional stochastic objective over `K`.
#[derive(Debug, Clone)]
pub struct LqgObjective {
    sys: LqgSystem,
}

pub fn lqg_objective(sys: LqgSystem) -> Result<LqgObjective, LqgError> {
    sys.validate()?;
    Ok(LqgObjective { sys })
}

impl LqgObjective {
    pub fn system(&self) -> &LqgSystem {
        &self.sys
    }
}

impl StochasticObjective for LqgObjective {
    fn dimension(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &[f64], rng: &mut RngStream) -> f64 {
        rollout_cost(&self.sys, PolicyGain(x[0]), rng)
    }

    fn expected_value(&self, x: &[f64]) -> Option<f64> {
        Some(expected_cost(&self.sys, PolicyGain(x[0])))
    }

    fn expected_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let k = x[0];
        let hi = expected_cost(&self.sys, PolicyGain(k + FD_STEP));
        let lo = expected_cost(&self.sys, PolicyGain(k - FD_STEP));
        Some(vec![(hi - lo) / (2.0 * FD_STEP)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic() -> LqgSystem {
        LqgSystem::benchmark(0.0)
    }

    #[test]
    fn deadbeat_rollout() {
        let sys = deterministic();
        let mut rng = RngStream::from_seed(0);
        assert_eq!(rollout_cost(&sys, PolicyGain(-11.0), &mut rng), 122.0);
        assert_eq!(expected_cost(&sys, PolicyGain(-11.0)), 122.0);
    }

    #[test]
    fn zero_initial_state_costs_nothing() {
        let sys = LqgSystem {
            x0_state: 0.0,
            ..deterministic()
        };
        let mut rng = RngStream::from_seed(0);
        for k in [-5.0, 0.0, 3.0] {
            assert_eq!(rollout_cost(&sys, PolicyGain(k), &mut rng), 0.0);
        }
    }

    #[test]
    fn noiseless_rollout_matches_geometric_sum() {
        let sys = deterministic();
        let k = -2.0;
        let rho = sys.gamma * (sys.a + sys.b * k).powi(2);
        let n = sys.horizon as i32 + 1;
        let closed = (sys.q + sys.r * k * k) * (1.0 - rho.powi(n)) / (1.0 - rho);
        let mut rng = RngStream::from_seed(0);
        let sim = rollout_cost(&sys, PolicyGain(k), &mut rng);
        assert!((sim - closed).abs() < 1e-12 * closed, "{sim} vs {closed}");
        assert_eq!(sim, expected_cost(&sys, PolicyGain(k)));
    }

    #[test]
    fn deadbeat_with_noise_matches_independent_recursion() {
        // With A + BK = 0 the state after one step is pure noise: m_t = sigma^2
        // for t >= 1, so E V = (Q + R K^2) (1 + sigma^2 sum_{t=1}^{H} gamma^t).
        let sys = LqgSystem::benchmark(0.01);
        let k = -11.0;
        let geo: f64 = (1..=50).map(|t| 0.7f64.powi(t)).sum();
        let oracle = 122.0 * (1.0 + 1e-4 * geo);
        let got = expected_cost(&sys, PolicyGain(k));
        assert!((got - oracle).abs() < 1e-12 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn unstable_rollouts_are_capped() {
        let sys = LqgSystem {
            horizon: 5000,
            ..deterministic()
        };
        let mut rng = RngStream::from_seed(0);
        assert_eq!(rollout_cost(&sys, PolicyGain(50.0), &mut rng), COST_CAP);
    }

    #[test]
    fn riccati_limits() {
        let tiny = LqgSystem {
            gamma: 1e-12,
            ..deterministic()
        };
        assert!(riccati_optimal_gain(&tiny).unwrap().0.abs() < 1e-9);
        let no_dynamics = LqgSystem {
            a: 0.0,
            ..deterministic()
        };
        assert_eq!(riccati_optimal_gain(&no_dynamics).unwrap().0, 0.0);
    }

    #[test]
    fn riccati_fixed_point_residual() {
        let sys = deterministic();
        let sol = solve_riccati(&sys).unwrap();
        let (a, b, q, r, g, p) = (sys.a, sys.b, sys.q, sys.r, sys.gamma, sol.p);
        let residual = q + g * a * a * p - (g * a * b * p).powi(2) / (r + g * b * b * p) - p;
        assert!(residual.abs() < 1e-10);
        // infinite-horizon optimal cost from x0 = 1 is P
        let long = LqgSystem {
            horizon: 500,
            ..sys
        };
        assert!((expected_cost(&long, sol.gain) - p).abs() < 1e-9);
    }

    #[test]
    fn invalid_systems_rejected() {
        for bad in [
            LqgSystem {
                q: 0.0,
                ..deterministic()
            },
            LqgSystem {
                gamma: 1.0,
                ..deterministic()
            },
            LqgSystem {
                noise_std: -1.0,
                ..deterministic()
            },
        ] {
            assert!(matches!(
                solve_riccati(&bad),
                Err(LqgError::InvalidSystem(_))
            ));
            assert!(lqg_objective(bad).is_err());
        }
    }

    #[test]
    fn perturbed_init_bounds_and_mean() {
        let kstar = PolicyGain(-0.4);
        assert_eq!(shift_gain(kstar, 0.0), kstar);
        assert!((shift_gain(kstar, 1.0).0 - 0.6).abs() < 1e-15);
        let mut rng = RngStream::from_seed(21);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                let k = perturbed_init(kstar, &mut rng).0;
                assert!((kstar.0..kstar.0 + 1.0).contains(&k));
                k
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - (kstar.0 + 0.5)).abs() < 0.003, "{mean}");
    }

    #[test]
    fn objective_wraps_rollouts() {
        let obj = lqg_objective(deterministic()).unwrap();
        assert_eq!(obj.dimension(), 1);
        let mut rng = RngStream::from_seed(0);
        assert_eq!(obj.evaluate(&[-11.0], &mut rng), 122.0);
        let kstar = riccati_optimal_gain(obj.system()).unwrap();
        let g = obj.expected_gradient(&[kstar.0]).unwrap()[0];
        assert!(g.abs() < 1e-3, "{g}");
    }

    #[test]
    fn rollouts_are_nonnegative() {
        let sys = LqgSystem::benchmark(0.5);
        let mut rng = RngStream::from_seed(4);
        for i in 0..2000 {
            let k = -15.0 + 0.01 * i as f64;
            assert!(rollout_cost(&sys, PolicyGain(k), &mut rng) >= 0.0);
        }
    }
}
