//! Ask/tell evolution strategies.
//!
//! All four strategies sample a batch of `λ` candidates from a (possibly
//! approximate) Gaussian and adapt it from a ranking of that batch. Only the
//! ranking and the candidate vectors reach the update rules, so any strictly
//! monotone rescaling of the ranking values leaves an update unchanged.

mod cma_params;
mod full_cma;
mod lm_ma;
mod openai;
mod ranking;
mod sep_cma;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

pub use full_cma::FullCma;
pub use lm_ma::LmMa;
pub use openai::OpenAiEs;
pub use ranking::RankedBatch;
pub use sep_cma::SepCma;

/// Generations without a single archive improvement before a restart fires.
pub const NO_IMPROVEMENT_PATIENCE: usize = 50;
/// Step sizes below this are treated as a collapsed distribution.
pub const MIN_STEP_SIZE: f64 = 1e-12;
/// Covariance condition number above which full CMA-ES restarts.
pub const MAX_CONDITION: f64 = 1e14;
/// Floor applied to variances and eigenvalues before taking square roots.
pub const VARIANCE_FLOOR: f64 = 1e-20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsError {
    #[error("non-finite value in ES parameter `{parameter}`")]
    NonFinite { parameter: &'static str },
    #[error("batch size mismatch: expected {expected} solutions, got {actual}")]
    BatchSize { expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("ranking values must not be NaN or +inf (index {index})")]
    InvalidRanking { index: usize },
    #[error("invalid ES parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

/// Which strategy backs an emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EsKind {
    FullCma,
    LmMa,
    SepCma,
    OpenAi,
}

impl EsKind {
    pub const ALL: [EsKind; 4] = [EsKind::FullCma, EsKind::LmMa, EsKind::SepCma, EsKind::OpenAi];

    /// Name of the QD algorithm built on this strategy (`cma-mae`, ...).
    pub fn algorithm_name(self) -> &'static str {
        match self {
            EsKind::FullCma => "cma-mae",
            EsKind::LmMa => "lm-ma-mae",
            EsKind::SepCma => "sep-cma-mae",
            EsKind::OpenAi => "openai-mae",
        }
    }

    /// Short name of the strategy itself, used in benchmark output.
    pub fn variant_name(self) -> &'static str {
        match self {
            EsKind::FullCma => "full-cma",
            EsKind::LmMa => "lm-ma",
            EsKind::SepCma => "sep-cma",
            EsKind::OpenAi => "openai",
        }
    }
}

impl fmt::Display for EsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.algorithm_name())
    }
}

impl FromStr for EsKind {
    type Err = String;

    /// Accepts either the algorithm name (`sep-cma-mae`) or the strategy
    /// name (`sep-cma`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        EsKind::ALL
            .into_iter()
            .find(|k| k.algorithm_name() == s || k.variant_name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Construction parameters shared by all strategies. Fields that do not
/// apply to a strategy are ignored by it.
#[derive(Debug, Clone, PartialEq)]
pub struct EsParams {
    pub kind: EsKind,
    /// λ, candidates per ask.
    pub batch_size: usize,
    /// Initial step size σ. For OpenAI-ES this is the permanent noise scale.
    pub sigma0: f64,
    /// Number of direction vectors `k` kept by LM-MA-ES.
    pub directions: usize,
    /// Adam learning rate (OpenAI-ES).
    pub learning_rate: f64,
    /// L2 (weight decay) coefficient on the mean (OpenAI-ES).
    pub l2_coeff: f64,
}

impl EsParams {
    pub fn new(kind: EsKind) -> Self {
        EsParams {
            kind,
            batch_size: 40,
            sigma0: 0.02,
            directions: 40,
            learning_rate: 0.01,
            l2_coeff: 0.005,
        }
    }

    pub fn batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn sigma0(mut self, sigma0: f64) -> Self {
        self.sigma0 = sigma0;
        self
    }

    pub fn directions(mut self, k: usize) -> Self {
        self.directions = k;
        self
    }

    pub fn learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn l2_coeff(mut self, l2: f64) -> Self {
        self.l2_coeff = l2;
        self
    }

    pub fn validate(&self) -> Result<(), EsError> {
        let bad = |name, reason: &str| {
            Err(EsError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.batch_size < 2 {
            return bad("batch_size", "must be at least 2");
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return bad("sigma0", "must be finite and > 0");
        }
        if self.kind == EsKind::LmMa && self.directions == 0 {
            return bad("directions", "must be at least 1");
        }
        if self.kind == EsKind::OpenAi {
            if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
                return bad("learning_rate", "must be finite and > 0");
            }
            if !(self.l2_coeff.is_finite() && self.l2_coeff >= 0.0) {
                return bad("l2_coeff", "must be finite and >= 0");
            }
        }
        Ok(())
    }
}

/// Search-distribution state of one emitter.
#[derive(Debug, Clone, PartialEq)]
pub enum EsState {
    FullCma(FullCma),
    LmMa(LmMa),
    SepCma(SepCma),
    OpenAi(OpenAiEs),
}

macro_rules! dispatch {
    ($self:expr, $s:ident => $body:expr) => {
        match $self {
            EsState::FullCma($s) => $body,
            EsState::LmMa($s) => $body,
            EsState::SepCma($s) => $body,
            EsState::OpenAi($s) => $body,
        }
    };
}

impl EsState {
    pub fn new(params: &EsParams, mean: &[f64]) -> Result<Self, EsError> {
        params.validate()?;
        if mean.is_empty() {
            return Err(EsError::InvalidParameter {
                name: "mean",
                reason: "dimension must be at least 1".into(),
            });
        }
        check_finite(mean, "mean")?;
        Ok(match params.kind {
            EsKind::FullCma => EsState::FullCma(FullCma::new(mean, params.sigma0, params.batch_size)),
            EsKind::LmMa => EsState::LmMa(LmMa::new(
                mean,
                params.sigma0,
                params.batch_size,
                params.directions,
            )),
            EsKind::SepCma => EsState::SepCma(SepCma::new(mean, params.sigma0, params.batch_size)),
            EsKind::OpenAi => EsState::OpenAi(OpenAiEs::new(
                mean,
                params.sigma0,
                params.batch_size,
                params.learning_rate,
                params.l2_coeff,
            )),
        })
    }

    pub fn kind(&self) -> EsKind {
        match self {
            EsState::FullCma(_) => EsKind::FullCma,
            EsState::LmMa(_) => EsKind::LmMa,
            EsState::SepCma(_) => EsKind::SepCma,
            EsState::OpenAi(_) => EsKind::OpenAi,
        }
    }

    /// Draws `λ` candidates. The distribution parameters are untouched; only
    /// `rng` advances.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>, EsError> {
        dispatch!(self, s => s.ask(rng))
    }

    /// Adapts the distribution from a ranked batch produced by the matching
    /// [`ask`](Self::ask).
    pub fn tell(&mut self, batch: &RankedBatch) -> Result<(), EsError> {
        let (n, lambda) = (self.dim(), self.batch_size());
        batch.check_shape(lambda, n)?;
        dispatch!(self, s => s.tell(batch))
    }

    /// Whether the strategy has converged (or diverged) and the emitter
    /// should restart. Pure predicate over the state after `tell(batch)`.
    pub fn needs_restart(&self, batch: &RankedBatch) -> bool {
        if self.generation() == 0 {
            return false;
        }
        if self.stalled_generations() >= NO_IMPROVEMENT_PATIENCE && batch.num_improved() == 0 {
            return true;
        }
        if !self.is_finite() {
            return true;
        }
        dispatch!(self, s => s.converged())
    }

    /// Re-initializes all adaptation state around `new_mean` with an
    /// isotropic distribution of scale `sigma0`.
    pub fn reset(&mut self, new_mean: &[f64], sigma0: f64) -> Result<(), EsError> {
        if new_mean.len() != self.dim() {
            return Err(EsError::Dimension {
                expected: self.dim(),
                actual: new_mean.len(),
            });
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(EsError::InvalidParameter {
                name: "sigma0",
                reason: "must be finite and > 0".into(),
            });
        }
        check_finite(new_mean, "mean")?;
        dispatch!(self, s => s.reset(new_mean, sigma0));
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        dispatch!(self, s => s.mean())
    }

    pub fn dim(&self) -> usize {
        self.mean().len()
    }

    pub fn batch_size(&self) -> usize {
        dispatch!(self, s => s.batch_size())
    }

    /// Number of completed `tell` calls since construction or last reset.
    pub fn generation(&self) -> usize {
        dispatch!(self, s => s.generation())
    }

    /// Consecutive generations in which no candidate improved the archive.
    pub fn stalled_generations(&self) -> usize {
        dispatch!(self, s => s.stalled())
    }

    /// Current global step size σ.
    pub fn step_size(&self) -> f64 {
        dispatch!(self, s => s.step_size())
    }

    /// Number of reals stored by the distribution representation.
    pub fn stored_reals(&self) -> usize {
        dispatch!(self, s => s.stored_reals())
    }

    /// Dense `n × n` covariance of the sampling distribution represented by
    /// this state (`σ² C` or its approximation). Intended for diagnostics
    /// and tests; this is `O(n²)` memory even for the scalable variants.
    pub fn represented_covariance(&self) -> DMatrix<f64> {
        dispatch!(self, s => s.represented_covariance())
    }

    pub fn is_finite(&self) -> bool {
        dispatch!(self, s => s.first_non_finite().is_none())
    }
}

pub(crate) fn check_finite(values: &[f64], parameter: &'static str) -> Result<(), EsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EsError::NonFinite { parameter })
    }
}

/// Counter update shared by every strategy: reset on any improvement.
pub(crate) fn next_stall_count(stalled: usize, batch: &RankedBatch) -> usize {
    if batch.num_improved() == 0 {
        stalled + 1
    } else {
        0
    }
}
