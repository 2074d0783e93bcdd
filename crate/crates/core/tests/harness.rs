use std::fs;
use std::path::Path;

use prefopt::estimator::EstimatorKind;
use prefopt::harness::{
    emit_outputs, run_experiment, ExperimentConfig, HarnessError, MethodConfig, ProblemConfig,
    SyntheticProblem,
};

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn small_lqg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::lqg_benchmark(
        0.01,
        vec![
            MethodConfig::new(EstimatorKind::PsgdU, 5e-4, 0.1),
            MethodConfig::new(EstimatorKind::PsgdG, 5e-4, 0.1),
            MethodConfig::new(EstimatorKind::ZoTwoPoint, 1e-3, 0.1),
        ],
    );
    cfg.trials = 4;
    cfg.optimizer_t = 60;
    cfg
}

#[test]
fn lqg_run_writes_csv_json_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&small_lqg()).unwrap();
    let written = emit_outputs(&res, dir.path()).unwrap();
    assert_eq!(written.len(), 6);
    assert_eq!(
        names(dir.path()),
        [
            "experiment.json",
            "fig_cost_error.svg",
            "fig_param_error.svg",
            "trace_psgd_g.csv",
            "trace_psgd_u.csv",
            "trace_zo_two_point.csv"
        ]
    );
    let csv = fs::read_to_string(dir.path().join("trace_psgd_u.csv")).unwrap();
    // header plus two metrics for t = 0..=60
    assert_eq!(csv.lines().count(), 1 + 2 * 61);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("experiment.json")).unwrap())
            .unwrap();
    assert_eq!(json["diverged_trials"], 0);
    assert_eq!(json["config"]["trials"], 4);
    assert_eq!(json["provenance"]["base_seed"], 0);
}

#[test]
fn empty_metric_list_gives_header_only_csv_and_no_figures() {
    let mut cfg = small_lqg();
    cfg.metrics = Some(Vec::new());
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&res, dir.path()).unwrap();
    assert_eq!(names(dir.path()).len(), 4);
    let csv = fs::read_to_string(dir.path().join("trace_zo_two_point.csv")).unwrap();
    assert_eq!(csv, "t,metric,mean,std\n");
}

#[test]
fn output_bytes_do_not_depend_on_thread_count() {
    let cfg = small_lqg();
    let run_in = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let res = pool.install(|| run_experiment(&cfg)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&res, dir.path()).unwrap();
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        bytes
    };
    assert_eq!(run_in(1), run_in(4));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["lqg_sigma001.json", "lqg_sigma005.json"] {
        let cfg = ExperimentConfig::load(&root.join(name)).unwrap();
        assert_eq!(cfg.methods.len(), 3);
        assert!(matches!(cfg.problem, ProblemConfig::Lqg(_)));
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let good = r#"{"problem": {"kind": "quadratic", "dimension": 2},
        "methods": [{"estimator": "psgd_u", "eta": "theorem", "delta": 0.1}],
        "trials": 2}"#;
    let cfg = ExperimentConfig::from_json(good).unwrap();
    assert_eq!(
        cfg.problem,
        ProblemConfig::Quadratic(SyntheticProblem {
            dimension: 2,
            noise_std: 0.0,
            x0: None
        })
    );
    let bad = good.replace("\"trials\": 2", "\"trials\": 2, \"seeds\": 3");
    assert!(matches!(
        ExperimentConfig::from_json(&bad),
        Err(HarnessError::Parse(_))
    ));
}
