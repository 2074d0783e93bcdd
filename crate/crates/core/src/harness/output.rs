use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{COST_ERROR, PARAM_ERROR};

use super::aggregate::{AggregateResult, MethodAggregate, Provenance};
use super::config::ExperimentConfig;
use super::svg::render_log_plot;
use super::HarnessError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_csv_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,metric,mean,std` rows for one method, `\n` line endings.
pub fn method_csv(method: &MethodAggregate) -> String {
    let mut out = String::from("t,metric,mean,std\n");
    let len = method.series.first().map_or(0, |s| s.mean.len());
    for t in 0..len {
        for s in &method.series {
            let _ = writeln!(
                out,
                "{t},{},{},{}",
                s.name,
                format_csv_value(s.mean[t]),
                format_csv_value(s.std[t])
            );
        }
    }
    out
}

#[derive(Serialize)]
struct ExperimentRecord<'a> {
    config: &'a ExperimentConfig,
    provenance: &'a Provenance,
    metrics: &'a [String],
    diverged_trials: usize,
    methods: &'a [MethodAggregate],
}

/// Writes `trace_<method>.csv`, `experiment.json` and the two log-scale
/// figures into `dir`, returning the paths written.
///
/// A figure is skipped when its metric was not recorded.
pub fn emit_outputs(result: &AggregateResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for m in &result.methods {
        let path = dir.join(format!("trace_{}.csv", m.id));
        fs::write(&path, method_csv(m))?;
        written.push(path);
    }

    let record = ExperimentRecord {
        config: &result.config,
        provenance: &result.provenance,
        metrics: &result.metric_names,
        diverged_trials: result.diverged_total(),
        methods: &result.methods,
    };
    let path = dir.join("experiment.json");
    let mut json = serde_json::to_string_pretty(&record)?;
    json.push('\n');
    fs::write(&path, json)?;
    written.push(path);

    for (metric, file, title) in [
        (PARAM_ERROR, "fig_param_error.svg", "policy parameter error"),
        (COST_ERROR, "fig_cost_error.svg", "cost value error"),
    ] {
        if !result.metric_names.iter().any(|m| m == metric) {
            continue;
        }
        let curves: Vec<(&str, &[f64], &[f64])> = result
            .methods
            .iter()
            .filter_map(|m| {
                m.series(metric)
                    .map(|s| (m.id.as_str(), s.mean.as_slice(), s.std.as_slice()))
            })
            .collect();
        let path = dir.join(file);
        fs::write(&path, render_log_plot(title, &curves))?;
        written.push(path);
    }
    Ok(written)
}
