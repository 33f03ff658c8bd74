//! The emitter loop: ψ emitters share one soft archive; each samples a
//! batch, inserts it, ranks by improvement, adapts, and restarts from a
//! random elite when its strategy converges.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::archive::{insert, ArchiveError, GridSpec, InsertResult, ResultArchive, SoftArchive, SolutionRecord};
use crate::domains::Domain;
use crate::es::{EsError, EsParams, EsState, RankedBatch};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("invalid scheduler config `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Es(#[from] EsError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

fn config_error(field: &'static str, reason: impl Into<String>) -> SchedulerError {
    SchedulerError::Config {
        field,
        reason: reason.into(),
    }
}

/// Outer-loop settings. λ and σ₀ live in `es`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    /// Number of emitters ψ.
    pub psi: usize,
    /// Number of iterations N.
    pub iterations: usize,
    pub es: EsParams,
    /// Initial solution φ₀; also the restart point while the archive is empty.
    pub initial_solution: Vec<f64>,
}

impl SchedulerConfig {
    pub fn new(psi: usize, iterations: usize, es: EsParams, initial_solution: Vec<f64>) -> Self {
        SchedulerConfig {
            psi,
            iterations,
            es,
            initial_solution,
        }
    }

    pub fn lambda(&self) -> usize {
        self.es.batch_size
    }

    pub fn sigma0(&self) -> f64 {
        self.es.sigma0
    }

    /// Total evaluations `N·ψ·λ`.
    pub fn evaluation_budget(&self) -> usize {
        self.iterations * self.psi * self.lambda()
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        if self.psi == 0 {
            return Err(config_error("psi", "must be at least 1"));
        }
        if self.es.batch_size < 2 {
            return Err(config_error("lambda", "must be at least 2"));
        }
        if !(self.es.sigma0.is_finite() && self.es.sigma0 > 0.0) {
            return Err(config_error("sigma0", "must be finite and > 0"));
        }
        if self.initial_solution.is_empty() {
            return Err(config_error("initial_solution", "must not be empty"));
        }
        if !self.initial_solution.iter().all(|v| v.is_finite()) {
            return Err(config_error("initial_solution", "must be finite"));
        }
        self.es.validate()?;
        Ok(())
    }
}

/// One ES instance with its own random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    pub es: EsState,
    pub rng: ChaCha8Rng,
    pub restarts: u64,
}

/// Per-iteration log line.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Cumulative evaluations, `iteration · ψ · λ`.
    pub evaluations: usize,
    pub qd_score: f64,
    pub coverage: f64,
    pub best: Option<f64>,
    pub restarts_this_iter: usize,
    /// Wall-clock milliseconds since the scheduler was created.
    pub wall_time_ms: u64,
}

impl IterationStats {
    pub const CSV_HEADER: &'static str = "iter,evals,qd_score,coverage,best,restarts,wall_time_ms";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration,
            self.evaluations,
            self.qd_score,
            self.coverage,
            self.best.map(|b| b.to_string()).unwrap_or_default(),
            self.restarts_this_iter,
            self.wall_time_ms
        )
    }

    /// Copy with the timing column zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        IterationStats {
            wall_time_ms: 0,
            ..self.clone()
        }
    }
}

/// Hooks into the inner loop. All methods default to no-ops.
pub trait StepObserver {
    /// Called after each archive insertion with the archive state after it.
    fn inserted(&mut self, _emitter: usize, _solution: &SolutionRecord, _result: &InsertResult, _soft: &SoftArchive) {}

    /// Called with each ranked batch before `tell`; `objectives` is indexed
    /// like the batch (`-inf` for failed evaluations).
    fn ranked(&mut self, _emitter: usize, _batch: &RankedBatch, _objectives: &[f64]) {}

    /// Called when an emitter restarts around `mean`.
    fn restarted(&mut self, _emitter: usize, _mean: &[f64]) {}
}

impl StepObserver for () {}

/// Final archives and per-iteration log of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub soft: SoftArchive,
    pub result: ResultArchive,
    pub log: Vec<IterationStats>,
    pub elapsed_ms: u64,
}

pub struct Scheduler {
    config: SchedulerConfig,
    emitters: Vec<Emitter>,
    soft: SoftArchive,
    result: ResultArchive,
    rng: ChaCha8Rng,
    iteration: usize,
    evaluations: usize,
    threads: usize,
    started: Instant,
}

impl Scheduler {
    pub fn new(
        config: SchedulerConfig,
        soft: SoftArchive,
        result: ResultArchive,
        master_seed: u64,
    ) -> Result<Self, SchedulerError> {
        config.validate()?;
        if soft.spec() != result.spec() {
            return Err(ArchiveError::GridMismatch.into());
        }
        let emitters = (0..config.psi)
            .map(|i| {
                Ok(Emitter {
                    es: EsState::new(&config.es, &config.initial_solution)?,
                    rng: rng::emitter_stream(master_seed, i),
                    restarts: 0,
                })
            })
            .collect::<Result<Vec<_>, EsError>>()?;
        Ok(Scheduler {
            config,
            emitters,
            soft,
            result,
            rng: rng::scheduler_stream(master_seed),
            iteration: 0,
            evaluations: 0,
            threads: threads_from_env(),
            started: Instant::now(),
        })
    }

    /// Caps the number of threads used to evaluate a batch.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn emitters(&self) -> &[Emitter] {
        &self.emitters
    }

    pub fn emitters_mut(&mut self) -> &mut [Emitter] {
        &mut self.emitters
    }

    pub fn soft(&self) -> &SoftArchive {
        &self.soft
    }

    pub fn result(&self) -> &ResultArchive {
        &self.result
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn into_archives(self) -> (SoftArchive, ResultArchive) {
        (self.soft, self.result)
    }

    pub fn step<E>(&mut self, evaluate: &E) -> Result<IterationStats, SchedulerError>
    where
        E: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
    {
        self.step_observed(evaluate, &mut ())
    }

    /// One iteration over all emitters in index order.
    pub fn step_observed<E, O>(&mut self, evaluate: &E, observer: &mut O) -> Result<IterationStats, SchedulerError>
    where
        E: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
        O: StepObserver + ?Sized,
    {
        let mut restarts = 0;
        for index in 0..self.emitters.len() {
            if self.step_emitter(index, evaluate, observer)? {
                restarts += 1;
            }
        }
        self.iteration += 1;
        Ok(self.stats(restarts))
    }

    fn stats(&self, restarts: usize) -> IterationStats {
        let occupied = self.result.occupied_count();
        IterationStats {
            iteration: self.iteration,
            evaluations: self.evaluations,
            qd_score: self.result.objective_sum() - occupied as f64 * self.result.min_f(),
            coverage: occupied as f64 / self.result.spec().cells() as f64,
            best: self.result.best(),
            restarts_this_iter: restarts,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
        }
    }

    /// Returns whether the emitter restarted.
    fn step_emitter<E, O>(&mut self, index: usize, evaluate: &E, observer: &mut O) -> Result<bool, SchedulerError>
    where
        E: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
        O: StepObserver + ?Sized,
    {
        let mut restarted = false;
        let solutions = {
            let emitter = &mut self.emitters[index];
            match emitter.es.ask(&mut emitter.rng) {
                Ok(s) => s,
                Err(EsError::NonFinite { .. }) => {
                    // Diverged state: restart and sample from the fresh one.
                    self.restart(index, observer)?;
                    restarted = true;
                    let emitter = &mut self.emitters[index];
                    emitter.es.ask(&mut emitter.rng)?
                }
                Err(e) => return Err(e.into()),
            }
        };

        let evaluated = evaluate_batch(&solutions, evaluate, self.threads);
        self.evaluations += solutions.len();

        let mut improvements = Vec::with_capacity(solutions.len());
        let mut objectives = Vec::with_capacity(solutions.len());
        let measure_dim = self.soft.spec().measure_dim();
        for (x, (f, m)) in solutions.iter().zip(evaluated) {
            if m.len() != measure_dim {
                return Err(ArchiveError::MeasureDimension {
                    expected: measure_dim,
                    actual: m.len(),
                }
                .into());
            }
            if !f.is_finite() || !m.iter().all(|v| v.is_finite()) {
                improvements.push(f64::NEG_INFINITY);
                objectives.push(f64::NEG_INFINITY);
                continue;
            }
            let record = SolutionRecord::new(x.clone(), f, m);
            let outcome = insert(&mut self.soft, &mut self.result, record.clone())?;
            observer.inserted(index, &record, &outcome, &self.soft);
            improvements.push(outcome.improvement);
            objectives.push(f);
        }

        let batch = RankedBatch::new(solutions, &improvements, &objectives)?;
        observer.ranked(index, &batch, &objectives);

        let es = &mut self.emitters[index].es;
        let must_restart = match es.tell(&batch) {
            Ok(()) => es.needs_restart(&batch),
            Err(EsError::NonFinite { .. }) => true,
            Err(e) => return Err(e.into()),
        };
        if must_restart {
            self.restart(index, observer)?;
            restarted = true;
        }
        Ok(restarted)
    }

    fn restart<O: StepObserver + ?Sized>(&mut self, index: usize, observer: &mut O) -> Result<(), SchedulerError> {
        let mean = match self.soft.random_elite(&mut self.rng) {
            Ok(elite) => elite.params.clone(),
            Err(ArchiveError::Empty) => self.config.initial_solution.clone(),
            Err(e) => return Err(e.into()),
        };
        let emitter = &mut self.emitters[index];
        emitter.es.reset(&mean, self.config.es.sigma0)?;
        emitter.restarts += 1;
        observer.restarted(index, &mean);
        Ok(())
    }
}

/// Evaluates a batch, splitting it over up to `threads` scoped threads.
/// Results come back in batch order.
fn evaluate_batch<E>(solutions: &[Vec<f64>], evaluate: &E, threads: usize) -> Vec<(f64, Vec<f64>)>
where
    E: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    if threads <= 1 || solutions.len() < 2 {
        return solutions.iter().map(|x| evaluate(x)).collect();
    }
    let chunk = solutions.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = solutions
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|x| evaluate(x)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    })
}

/// Evaluation thread cap from `QD_THREADS` (default 1).
pub fn threads_from_env() -> usize {
    std::env::var("QD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Builds archives over `domain`'s measure box and runs `config.iterations`
/// iterations.
pub fn run<D: Domain + ?Sized>(
    config: &SchedulerConfig,
    domain: &D,
    grid_dims: &[usize],
    alpha: f64,
    min_f: f64,
    master_seed: u64,
) -> Result<RunOutput, SchedulerError> {
    run_observed(config, domain, grid_dims, alpha, min_f, master_seed, &mut ())
}

pub fn run_observed<D, O>(
    config: &SchedulerConfig,
    domain: &D,
    grid_dims: &[usize],
    alpha: f64,
    min_f: f64,
    master_seed: u64,
    observer: &mut O,
) -> Result<RunOutput, SchedulerError>
where
    D: Domain + ?Sized,
    O: StepObserver + ?Sized,
{
    if config.initial_solution.len() != domain.dim() {
        return Err(config_error(
            "initial_solution",
            format!("length {} does not match domain dimension {}", config.initial_solution.len(), domain.dim()),
        ));
    }
    let (lower, upper) = domain.measure_bounds();
    let spec = GridSpec::new(grid_dims.to_vec(), lower, upper)?;
    let soft = SoftArchive::new(spec.clone(), alpha, min_f)?;
    let result = ResultArchive::new(spec, min_f)?;
    let mut scheduler = Scheduler::new(config.clone(), soft, result, master_seed)?;
    let evaluate = |x: &[f64]| domain.evaluate(x);
    let mut log = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        log.push(scheduler.step_observed(&evaluate, observer)?);
    }
    let elapsed_ms = scheduler.started.elapsed().as_millis() as u64;
    let (soft, result) = scheduler.into_archives();
    Ok(RunOutput {
        soft,
        result,
        log,
        elapsed_ms,
    })
}
