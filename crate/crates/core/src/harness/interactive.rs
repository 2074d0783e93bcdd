use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::estimator::{EstimatorKind, EstimatorStreams};
use crate::optimizer::{run_with_oracle, OptimizerError, TrialTrace};
use crate::oracle::{InteractiveOracle, ResponseRecord};

use super::aggregate::optimizer_config;
use super::config::ExperimentConfig;
use super::problem::Problem;
use super::HarnessError;

#[derive(Debug, Clone, Serialize)]
pub struct SessionOutcome {
    pub aborted: bool,
    pub trace: TrialTrace,
    pub responses: Vec<ResponseRecord>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Runs the comparison SGD loop with a person answering every query.
///
/// Uses the first method of `cfg` (which must be `psgd_u`), `optimizer_t`
/// iterations, and the trial-0 starting point of the configured problem.
/// The trace and the response log are written to `dir` as
/// `interactive_trace.json`, also when the person aborts.
pub fn interactive_session<R: BufRead, W: Write>(
    cfg: &ExperimentConfig,
    input: R,
    output: W,
    dir: &Path,
) -> Result<SessionOutcome, HarnessError> {
    cfg.validate()?;
    let method = &cfg.methods[0];
    if method.estimator != EstimatorKind::PsgdU {
        return Err(HarnessError::Config(format!(
            "interactive sessions use psgd_u, got {}",
            method.estimator.name()
        )));
    }
    let problem = Problem::build(&cfg.problem)?;
    let d = problem.config.dimension();
    let x0 = problem.initial_point(cfg.base_seed, 0);
    let opt = optimizer_config(method, d, cfg.optimizer_t, x0, cfg.base_seed);
    let mut streams = EstimatorStreams::derive(cfg.base_seed, 0, method.id());
    let mut oracle = InteractiveOracle::new(d, input, output);

    let (trace, aborted) = match run_with_oracle(&mut oracle, &opt, &[], &mut streams) {
        Ok(trace) => (trace, false),
        Err(e @ OptimizerError::InvalidConfig(_)) => return Err(e.into()),
        Err(e) => {
            let trace = e.into_trace().expect("runtime errors carry a trace");
            (trace, true)
        }
    };
    let mut outcome = SessionOutcome {
        aborted,
        trace,
        responses: oracle.into_log(),
        files: Vec::new(),
    };
    fs::create_dir_all(dir)?;
    let path = dir.join("interactive_trace.json");
    let mut json = serde_json::to_string_pretty(&outcome)?;
    json.push('\n');
    fs::write(&path, json)?;
    outcome.files.push(path);
    Ok(outcome)
}
