//! File-based experiment harness: seeded trials, α sweeps, complexity
//! benchmarks and heatmap export.
//!
//! Layout of a run directory:
//!
//! ```text
//! <output_dir>/summary.csv
//! <output_dir>/trial_<seed>/log.csv
//! <output_dir>/trial_<seed>/result_archive.csv
//! <output_dir>/trial_<seed>/soft_archive.csv
//! <output_dir>/trial_<seed>/heatmap.csv
//! ```

mod bench;
mod config;

use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::archive::{write_heatmap, ResultArchive, SoftArchive};
use crate::metrics::{summarize, MetricsReport};
use crate::scheduler::{self, IterationStats, Scheduler, SchedulerError};
use crate::{GridSpec, Domain};

pub use bench::{bench_complexity, write_complexity_csv, BenchRow};
pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
}

impl ExperimentError {
    /// Field name for configuration errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ExperimentError::Config(e) => Some(&e.field),
            ExperimentError::Scheduler(SchedulerError::Config { field, .. }) => Some(field),
            _ => None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_file<F>(path: &Path, body: F) -> Result<(), ExperimentError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let mut out = create(path)?;
    body(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

/// Final metrics of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub restarts: u64,
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub trials: Vec<TrialSummary>,
    pub mean: MetricsReport,
}

fn mean_report(trials: &[TrialSummary]) -> MetricsReport {
    let n = trials.len().max(1) as f64;
    let bests: Vec<f64> = trials.iter().filter_map(|t| t.metrics.best).collect();
    MetricsReport {
        qd_score: trials.iter().map(|t| t.metrics.qd_score).sum::<f64>() / n,
        coverage: trials.iter().map(|t| t.metrics.coverage).sum::<f64>() / n,
        best: (!bests.is_empty()).then(|| bests.iter().sum::<f64>() / bests.len() as f64),
        elapsed_ms: (trials.iter().map(|t| t.metrics.elapsed_ms).sum::<u64>() as f64 / n).round() as u64,
    }
}

/// Runs every seed of `config` and writes per-trial outputs plus
/// `summary.csv`. Human-readable progress goes to `progress`.
pub fn run_experiment(
    config: &ExperimentConfig,
    progress: &mut dyn Write,
) -> Result<ExperimentSummary, ExperimentError> {
    config.validate()?;
    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let _ = writeln!(
        progress,
        "{} on {}: {} seeds x {} evaluations (N={} psi={} lambda={}), alpha={}",
        config.algorithm,
        config.domain,
        config.seeds.len(),
        config.evaluation_budget(),
        config.iterations,
        config.psi,
        config.lambda,
        config.alpha,
    );

    let mut trials = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let trial = run_trial(config, seed, &out_dir.join(format!("trial_{seed}")))?;
        let _ = writeln!(progress, "  seed {seed}: {}", trial.metrics);
        trials.push(trial);
    }
    let mean = mean_report(&trials);
    let _ = writeln!(progress, "  mean: {mean}");

    let path = out_dir.join("summary.csv");
    write_file(&path, |out| {
        writeln!(out, "trial,seed,{},restarts", MetricsReport::CSV_HEADER)?;
        for t in &trials {
            writeln!(out, "trial_{0},{0},{1},{2}", t.seed, t.metrics.csv_row(), t.restarts)?;
        }
        let mean_restarts = trials.iter().map(|t| t.restarts as f64).sum::<f64>() / trials.len() as f64;
        writeln!(out, "mean,,{},{}", mean.csv_row(), mean_restarts)
    })?;
    Ok(ExperimentSummary { trials, mean })
}

fn write_archives(dir: &Path, soft: &SoftArchive, result: &ResultArchive, suffix: &str) -> Result<(), ExperimentError> {
    write_file(&dir.join(format!("result_archive{suffix}.csv")), |o| result.write_csv(o))?;
    write_file(&dir.join(format!("soft_archive{suffix}.csv")), |o| soft.write_csv(o))?;
    if result.spec().measure_dim() == 2 {
        write_file(&dir.join(format!("heatmap{suffix}.csv")), |o| result.write_heatmap(o))?;
    }
    Ok(())
}

fn run_trial(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<TrialSummary, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let sched_config = config.scheduler_config();
    let (lower, upper) = config.domain.measure_bounds();
    let spec = GridSpec::new(config.grid_dims.clone(), lower, upper)
        .map_err(|e| ConfigError::new("grid_dims", e.to_string()))?;
    let soft = SoftArchive::new(spec.clone(), config.alpha, config.min_f).map_err(SchedulerError::from)?;
    let result = ResultArchive::new(spec, config.min_f).map_err(SchedulerError::from)?;
    let mut scheduler = Scheduler::new(sched_config, soft, result, seed)?;

    let log_path = dir.join("log.csv");
    let mut log = create(&log_path)?;
    writeln!(log, "{}", IterationStats::CSV_HEADER).map_err(io_err(&log_path))?;
    let domain = &config.domain;
    let evaluate = |x: &[f64]| domain.evaluate(x);
    let mut last = None;
    for _ in 0..config.iterations {
        let stats = scheduler.step(&evaluate)?;
        writeln!(log, "{}", stats.csv_row()).map_err(io_err(&log_path))?;
        if let Some(every) = config.checkpoint_every {
            if stats.iteration % every == 0 && stats.iteration < config.iterations {
                write_archives(dir, scheduler.soft(), scheduler.result(), &format!("_{}", stats.iteration))?;
            }
        }
        last = Some(stats);
    }
    log.flush().map_err(io_err(&log_path))?;

    let elapsed_ms = last.map_or(0, |s| s.wall_time_ms);
    let restarts = scheduler.emitters().iter().map(|e| e.restarts).sum();
    let metrics = summarize(scheduler.result(), config.min_f, elapsed_ms);
    write_archives(dir, scheduler.soft(), scheduler.result(), "")?;
    Ok(TrialSummary { seed, metrics, restarts })
}

/// Directory name for one α value, e.g. `alpha_0.001`.
pub fn alpha_dir_name(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

/// Runs [`run_experiment`] once per α under `alpha_<value>/` and writes
/// `alpha_summary.csv` with the mean metrics of each.
pub fn sweep_alpha(
    config: &ExperimentConfig,
    alphas: &[f64],
    progress: &mut dyn Write,
) -> Result<Vec<(f64, ExperimentSummary)>, ExperimentError> {
    if alphas.is_empty() {
        return Err(ConfigError::new("alphas", "at least one alpha is required").into());
    }
    for &a in alphas {
        if !(0.0..=1.0).contains(&a) {
            return Err(ConfigError::new("alphas", format!("{a} is outside [0, 1]")).into());
        }
    }
    config.validate()?;
    let root = &config.output_dir;
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut results = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut cfg = config.clone();
        cfg.alpha = alpha;
        cfg.output_dir = root.join(alpha_dir_name(alpha));
        results.push((alpha, run_experiment(&cfg, progress)?));
    }
    let path = root.join("alpha_summary.csv");
    write_file(&path, |out| {
        writeln!(out, "alpha,{}", MetricsReport::CSV_HEADER)?;
        for (alpha, summary) in &results {
            writeln!(out, "{alpha},{}", summary.mean.csv_row())?;
        }
        Ok(())
    })?;
    Ok(results)
}

/// Reads an archive CSV (`cell_index,...,objective[,threshold]`) and writes
/// the dense `rows × cols` objective heatmap.
pub fn heatmap_from_archive_csv<R: BufRead, W: Write>(
    input: R,
    rows: usize,
    cols: usize,
    output: W,
) -> Result<(), ExperimentError> {
    let cells = rows
        .checked_mul(cols)
        .filter(|&c| c > 0)
        .ok_or_else(|| ExperimentError::Input("heatmap dimensions must be positive".into()))?;
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| ExperimentError::Input(e.to_string()))?
        .ok_or_else(|| ExperimentError::Input("empty archive file".into()))?;
    let columns: Vec<&str> = header.trim().split(',').collect();
    let objective_col = columns
        .iter()
        .position(|c| *c == "objective")
        .filter(|_| columns.first() == Some(&"cell_index"))
        .ok_or_else(|| ExperimentError::Input("header must start with cell_index and contain objective".into()))?;

    let mut values = vec![None; cells];
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| ExperimentError::Input(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let bad = || ExperimentError::Input(format!("malformed row {}", lineno + 2));
        let cell: usize = fields.first().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let objective: f64 = fields.get(objective_col).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if cell >= cells {
            return Err(ExperimentError::Input(format!(
                "cell {cell} does not fit a {rows}x{cols} grid"
            )));
        }
        values[cell] = Some(objective);
    }
    write_heatmap(output, rows, cols, &values).map_err(|e| ExperimentError::Input(e.to_string()))
}

/// Convenience wrapper around [`scheduler::run`] for a parsed config and a
/// single seed, without writing files.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<scheduler::RunOutput, ExperimentError> {
    config.validate()?;
    Ok(scheduler::run(
        &config.scheduler_config(),
        &config.domain,
        &config.grid_dims,
        config.alpha,
        config.min_f,
        seed,
    )?)
}
