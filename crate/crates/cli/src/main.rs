use std::io;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use prefopt::diagnostics::estimate_cd;
use prefopt::harness::{
    emit_outputs, interactive_session, run_experiment, sweep_tuning, ExperimentConfig,
    DEFAULT_DELTA_GRID, DEFAULT_ETA_GRID,
};
use prefopt::rng::{RngStream, StreamRole};

#[derive(Parser)]
#[command(
    name = "prefopt",
    version,
    about = "Optimization from noisy pairwise comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-trial experiment and write CSV, JSON and SVG outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Grid-search eta and delta per method; prints the tuned config.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to 1e-4,2e-4,...,1e-2.
        #[arg(long, value_delimiter = ',')]
        eta_grid: Vec<f64>,
        /// Defaults to 0.01,0.02,0.05,0.1,0.2,0.5,1.
        #[arg(long, value_delimiter = ',')]
        delta_grid: Vec<f64>,
        /// Also write the tuned config to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Answer the comparison queries yourself on the terminal.
    Interactive {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print Monte Carlo estimates of E|u_1| for uniform directions.
    CdTable {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            parallel,
        } => {
            let mut cfg = load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let result = with_pool(parallel, || run_experiment(&cfg))??;
            let files = emit_outputs(&result, &cfg.output_dir)?;
            for m in &result.methods {
                let finals: Vec<String> = result
                    .metric_names
                    .iter()
                    .map(|name| format!("{name}={:.4e}", m.final_mean(name).unwrap_or(f64::NAN)))
                    .collect();
                println!(
                    "{:<14} eta={:<10} delta={:<8} diverged={} final mean: {}",
                    m.id,
                    m.eta,
                    m.delta,
                    m.diverged_trials.len(),
                    finals.join(" ")
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Tune {
            config,
            eta_grid,
            delta_grid,
            out,
            parallel,
        } => {
            let cfg = load(&config)?;
            let eta_grid = if eta_grid.is_empty() {
                DEFAULT_ETA_GRID.to_vec()
            } else {
                eta_grid
            };
            let delta_grid = if delta_grid.is_empty() {
                DEFAULT_DELTA_GRID.to_vec()
            } else {
                delta_grid
            };
            let tuned = with_pool(parallel, || sweep_tuning(&cfg, &eta_grid, &delta_grid))??;
            for (id, cell) in &tuned.best {
                eprintln!(
                    "{id}: eta={} delta={} final {}={:.4e}",
                    cell.eta, cell.delta, tuned.selection_metric, cell.score
                );
            }
            let json = serde_json::to_string_pretty(&tuned.apply(&cfg))?;
            if let Some(path) = out {
                std::fs::write(&path, format!("{json}\n"))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{json}");
        }
        Command::Interactive { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let stdin = io::stdin();
            let outcome = interactive_session(&cfg, stdin.lock(), io::stdout(), &dir)?;
            println!(
                "{} after {} rows; final point {:?}",
                if outcome.aborted {
                    "aborted"
                } else {
                    "finished"
                },
                outcome.trace.records.len(),
                outcome.trace.final_x
            );
            for f in outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::CdTable {
            dims,
            samples,
            seed,
        } => {
            println!("d,c_d,c_d*sqrt(d)");
            for d in dims {
                let mut rng =
                    RngStream::derive(seed, d as u64, "cd-table", StreamRole::Diagnostics);
                let cd = estimate_cd(d, samples, &mut rng)?;
                println!("{d},{cd:.6},{:.6}", cd * (d as f64).sqrt());
            }
        }
    }
    Ok(())
}
