use prefopt::diagnostics::{grad_norm_metric, running_average, GRAD_NORM};
use prefopt::estimator::{estimate, EstimatorConfig, EstimatorKind, EstimatorStreams};
use prefopt::lqg::{expected_cost, lqg_objective, riccati_optimal_gain, LqgSystem, PolicyGain};
use prefopt::optimizer::{run, OptimizerConfig, StepSize};
use prefopt::oracle::{quadratic_objective, ObjectiveOracle, StochasticObjective};
use proptest::prelude::*;
use std::sync::Arc;

fn mean_estimate(
    kind: EstimatorKind,
    delta: f64,
    x: &[f64],
    n: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    let obj = quadratic_objective(x.len(), 0.0);
    let cfg = EstimatorConfig::new(kind, delta, x.len()).unwrap();
    let mut oracle = ObjectiveOracle::new(&obj);
    let mut streams = EstimatorStreams::derive(seed, 0, kind.name());
    let mut mean = vec![0.0; x.len()];
    let mut sq = 0.0;
    for t in 0..n {
        let g = estimate(&mut oracle, t, x, &cfg, &mut streams).unwrap().g;
        for (m, v) in mean.iter_mut().zip(&g) {
            *m += v / n as f64;
        }
        sq += g.iter().map(|v| v * v).sum::<f64>() / n as f64;
    }
    (mean, sq)
}

#[test]
fn gaussian_sign_estimate_second_moment() {
    // |g|^2 = (d/delta)^2 |v|^2 with v standard normal: 9 * 3
    let (_, sq) = mean_estimate(EstimatorKind::PsgdG, 1.0, &[0.3, -0.2, 0.5], 100_000, 1);
    assert!((sq - 27.0).abs() < 0.5, "{sq}");
}

#[test]
fn two_point_estimate_is_unbiased_on_quadratic() {
    // sphere smoothing leaves the gradient of a quadratic unchanged
    let (mean, _) = mean_estimate(EstimatorKind::ZoTwoPoint, 0.01, &[1.0, 0.0], 200_000, 2);
    assert!((mean[0] - 2.0).abs() < 0.02, "{mean:?}");
    assert!(mean[1].abs() < 0.02, "{mean:?}");
}

#[test]
fn sign_estimate_points_downhill_on_average() {
    let (mean, _) = mean_estimate(EstimatorKind::PsgdU, 0.01, &[0.0, 2.0, 0.0], 50_000, 3);
    assert!(mean[1] > 0.0 && mean[1] > 10.0 * mean[0].abs().max(mean[2].abs()));
}

fn whole_run_average(iterations: usize, seeds: u64) -> f64 {
    let obj = Arc::new(quadratic_objective(5, 0.0));
    let metric = grad_norm_metric(obj.clone()).unwrap();
    let total: f64 = (0..seeds)
        .map(|seed| {
            let cfg = OptimizerConfig {
                iterations,
                step: StepSize::Theorem,
                estimator: EstimatorConfig::new(EstimatorKind::PsgdU, 0.01, 5).unwrap(),
                x0: vec![1.0, 0.0, 0.0, 0.0, 0.0],
                seed,
            };
            let tr = run(obj.as_ref(), &cfg, std::slice::from_ref(&metric)).unwrap();
            *running_average(&tr.metric_series(GRAD_NORM).unwrap())
                .last()
                .unwrap()
        })
        .sum();
    total / seeds as f64
}

#[test]
fn quadrupling_the_budget_roughly_halves_the_average_gradient() {
    let ratio = whole_run_average(1000, 20) / whole_run_average(4000, 20);
    assert!((1.4..=2.8).contains(&ratio), "{ratio}");
}

#[test]
fn lqg_gradient_matches_richardson_extrapolation() {
    let sys = LqgSystem::benchmark(0.01);
    let obj = lqg_objective(sys.clone()).unwrap();
    let kstar = riccati_optimal_gain(&sys).unwrap().value();
    let v = |k: f64| expected_cost(&sys, PolicyGain(k));
    for k in [kstar - 1.0, kstar - 0.3, kstar + 0.4, kstar + 1.0] {
        let central = |h: f64| (v(k + h) - v(k - h)) / (2.0 * h);
        let h = 1e-2;
        let richardson = (4.0 * central(h / 2.0) - central(h)) / 3.0;
        let g = obj.expected_gradient(&[k]).unwrap()[0];
        assert!(
            (g - richardson).abs() < 1e-5 * richardson.abs().max(1.0),
            "K={k}: {g} vs {richardson}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sign_estimate_norm_is_d_over_delta(
        seed in any::<u64>(),
        d in 1usize..12,
        delta in 1e-3f64..1.0,
        scale in 0.0f64..5.0,
    ) {
        let obj = quadratic_objective(d, 0.3);
        let cfg = EstimatorConfig::new(EstimatorKind::PsgdU, delta, d).unwrap();
        let mut oracle = ObjectiveOracle::new(&obj);
        let mut streams = EstimatorStreams::derive(seed, 0, "prop");
        let x: Vec<f64> = (0..d).map(|i| scale * (i as f64 - 2.0)).collect();
        let est = estimate(&mut oracle, 0, &x, &cfg, &mut streams).unwrap();
        let n = est.g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expected = d as f64 / delta;
        prop_assert!((n - expected).abs() <= 1e-12 * expected);
    }
}
