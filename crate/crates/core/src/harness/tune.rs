use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{COST_ERROR, GRAD_NORM};
use crate::optimizer::StepSize;

use super::aggregate::execute;
use super::config::{ExperimentConfig, MethodConfig};
use super::HarnessError;

/// Trials per grid cell.
pub const TUNING_TRIALS: usize = 3;

/// Step sizes tried when no grid is given: 1-2-5 steps over two decades.
pub const DEFAULT_ETA_GRID: [f64; 7] = [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2];

/// Smoothing radii tried when no grid is given.
pub const DEFAULT_DELTA_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Mixed into the base seed so tuning never reuses the evaluation trials.
const TUNING_SEED_SALT: u64 = 0x7475_6e65_5f73_6565;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedCell {
    pub eta: f64,
    pub delta: f64,
    /// Final mean of the selection metric.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub selection_metric: String,
    /// Best cell per method id.
    pub best: BTreeMap<String, TunedCell>,
}

impl TuningResult {
    /// Copy of `cfg` with every tuned method's `eta` and `delta` replaced.
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut out = cfg.clone();
        for m in &mut out.methods {
            if let Some(cell) = self.best.get(m.id()) {
                m.eta = StepSize::Fixed(cell.eta);
                m.delta = cell.delta;
            }
        }
        out
    }
}

fn sorted_grid(grid: &[f64], name: &str) -> Result<Vec<f64>, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Tuning(format!("{name} grid is empty")));
    }
    if let Some(v) = grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(HarnessError::Tuning(format!(
            "{name} grid has non-positive value {v}"
        )));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Lowest finite score wins; ties go to the smaller `eta`, then the smaller
/// `delta`. `None` marks a cell where every trial diverged.
pub fn select_best(cells: &[(f64, f64, Option<f64>)]) -> Option<TunedCell> {
    let mut chosen: Option<TunedCell> = None;
    for &(eta, delta, score) in cells {
        let Some(score) = score.filter(|s| s.is_finite()) else {
            continue;
        };
        let better = match chosen {
            None => true,
            Some(c) => (score, eta, delta) < (c.score, c.eta, c.delta),
        };
        if better {
            chosen = Some(TunedCell { eta, delta, score });
        }
    }
    chosen
}

/// Grid search over `(eta, delta)` per method.
///
/// Each cell runs [`TUNING_TRIALS`] trials on a salted seed and is scored by
/// the final mean cost error (gradient norm when the problem has no cost
/// target). Ties go to the smaller `eta`, then the smaller `delta`. Cells
/// where every trial diverged are skipped.
pub fn sweep_tuning(
    cfg: &ExperimentConfig,
    eta_grid: &[f64],
    delta_grid: &[f64],
) -> Result<TuningResult, HarnessError> {
    cfg.validate()?;
    let etas = sorted_grid(eta_grid, "eta")?;
    let deltas = sorted_grid(delta_grid, "delta")?;
    let selection = if cfg.problem.supported_metrics().contains(&COST_ERROR) {
        COST_ERROR
    } else {
        GRAD_NORM
    };

    let mut best = BTreeMap::new();
    for method in &cfg.methods {
        let mut scores = Vec::with_capacity(etas.len() * deltas.len());
        for &eta in &etas {
            for &delta in &deltas {
                let cell_cfg = ExperimentConfig {
                    methods: vec![MethodConfig {
                        eta: StepSize::Fixed(eta),
                        delta,
                        ..method.clone()
                    }],
                    trials: TUNING_TRIALS,
                    base_seed: cfg.base_seed ^ TUNING_SEED_SALT,
                    metrics: Some(vec![selection.to_string()]),
                    ..cfg.clone()
                };
                let res = execute(&cell_cfg)?;
                scores.push((eta, delta, res.methods[0].final_mean(selection)));
            }
        }
        let chosen = select_best(&scores);
        let cell = chosen.ok_or_else(|| {
            HarnessError::Tuning(format!(
                "every grid cell diverged for method {}",
                method.id()
            ))
        })?;
        best.insert(method.id().to_string(), cell);
    }
    Ok(TuningResult {
        selection_metric: selection.to_string(),
        best,
    })
}
