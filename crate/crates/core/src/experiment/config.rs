use std::fmt;
use std::path::PathBuf;

use crate::domains::{Domain, DomainKind};
use crate::es::{EsKind, EsParams};
use crate::scheduler::SchedulerConfig;

/// A configuration problem, tagged with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// One experiment: a domain, an algorithm, its hyperparameters and the
/// seeds to run.
///
/// Defaults are the benchmark settings: ψ = 5, λ = 40, σ = 0.02,
/// α = 0.001, min_f = 0, a 100×100 grid and 10 000 iterations
/// (2·10⁶ evaluations).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub algorithm: EsKind,
    pub psi: usize,
    pub lambda: usize,
    pub iterations: usize,
    pub sigma0: f64,
    pub alpha: f64,
    pub min_f: f64,
    pub grid_dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// LM-MA-ES direction count.
    pub k: usize,
    /// OpenAI-ES Adam learning rate.
    pub learning_rate: f64,
    /// OpenAI-ES L2 coefficient.
    pub l2_coeff: f64,
    /// Also write archives every this many iterations.
    pub checkpoint_every: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainKind::Sphere(crate::domains::SphereDomain::new(100)),
            algorithm: EsKind::FullCma,
            psi: 5,
            lambda: 40,
            iterations: 10_000,
            sigma0: 0.02,
            alpha: 0.001,
            min_f: 0.0,
            grid_dims: vec![100, 100],
            seeds: vec![0],
            output_dir: PathBuf::from("results"),
            k: 40,
            learning_rate: 0.01,
            l2_coeff: 0.005,
            checkpoint_every: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError::new(field, format!("cannot parse `{}`", value.trim())))
}

fn parse_list<T: std::str::FromStr>(field: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split([',', 'x', ' '])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(field, s))
        .collect()
}

impl ExperimentConfig {
    /// Known keys, in the order they are documented.
    pub const KEYS: [&'static str; 15] = [
        "domain",
        "algorithm",
        "psi",
        "lambda",
        "iterations",
        "sigma0",
        "alpha",
        "min_f",
        "grid_dims",
        "seeds",
        "output_dir",
        "k",
        "learning_rate",
        "l2_coeff",
        "checkpoint_every",
    ];

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config = Self::parse_unvalidated(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Like [`parse`](Self::parse) but skips [`validate`](Self::validate),
    /// so callers can apply further overrides first.
    pub fn parse_unvalidated(text: &str) -> Result<Self, ConfigError> {
        let mut config = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Sets one field from its textual value. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "domain" => self.domain = v.parse().map_err(|e: String| ConfigError::new("domain", e))?,
            "algorithm" => self.algorithm = v.parse().map_err(|e: String| ConfigError::new("algorithm", e))?,
            "psi" => self.psi = parse_num("psi", v)?,
            "lambda" => self.lambda = parse_num("lambda", v)?,
            "iterations" => self.iterations = parse_num("iterations", v)?,
            "sigma0" | "sigma" => self.sigma0 = parse_num("sigma0", v)?,
            "alpha" => self.alpha = parse_num("alpha", v)?,
            "min_f" => self.min_f = parse_num("min_f", v)?,
            "grid_dims" => self.grid_dims = parse_list("grid_dims", v)?,
            "seeds" => self.seeds = parse_list("seeds", v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "k" => self.k = parse_num("k", v)?,
            "learning_rate" => self.learning_rate = parse_num("learning_rate", v)?,
            "l2_coeff" => self.l2_coeff = parse_num("l2_coeff", v)?,
            "checkpoint_every" => {
                let every: usize = parse_num("checkpoint_every", v)?;
                self.checkpoint_every = (every > 0).then_some(every);
            }
            other => return Err(ConfigError::new(other, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(ConfigError::new(field, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("psi", self.psi)?;
        if self.lambda < 2 {
            return Err(ConfigError::new("lambda", "must be at least 2"));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(ConfigError::new("sigma0", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::new("alpha", "must lie in [0, 1]"));
        }
        if !self.min_f.is_finite() {
            return Err(ConfigError::new("min_f", "must be finite"));
        }
        if self.grid_dims.len() != 2 || self.grid_dims.iter().any(|&d| d == 0) {
            return Err(ConfigError::new("grid_dims", "need two positive cell counts, e.g. `100,100`"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::new("seeds", "seeds must be distinct"));
        }
        if self.algorithm == EsKind::LmMa {
            positive("k", self.k)?;
        }
        if self.algorithm == EsKind::OpenAi {
            if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
                return Err(ConfigError::new("learning_rate", "must be finite and > 0"));
            }
            if !(self.l2_coeff.is_finite() && self.l2_coeff >= 0.0) {
                return Err(ConfigError::new("l2_coeff", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn evaluation_budget(&self) -> usize {
        self.iterations * self.psi * self.lambda
    }

    pub fn es_params(&self) -> EsParams {
        EsParams::new(self.algorithm)
            .batch_size(self.lambda)
            .sigma0(self.sigma0)
            .directions(self.k)
            .learning_rate(self.learning_rate)
            .l2_coeff(self.l2_coeff)
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig::new(
            self.psi,
            self.iterations,
            self.es_params(),
            self.domain.initial_solution(),
        )
    }

    /// Canonical `key = value` rendering, parseable by [`parse`](Self::parse).
    pub fn to_kv_string(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("domain", self.domain.name());
        line("algorithm", self.algorithm.algorithm_name().to_string());
        line("psi", self.psi.to_string());
        line("lambda", self.lambda.to_string());
        line("iterations", self.iterations.to_string());
        line("sigma0", self.sigma0.to_string());
        line("alpha", self.alpha.to_string());
        line("min_f", self.min_f.to_string());
        line("grid_dims", join(self.grid_dims.iter().map(|d| d.to_string()).collect()));
        line("seeds", join(self.seeds.iter().map(|d| d.to_string()).collect()));
        line("output_dir", self.output_dir.display().to_string());
        line("k", self.k.to_string());
        line("learning_rate", self.learning_rate.to_string());
        line("l2_coeff", self.l2_coeff.to_string());
        line("checkpoint_every", self.checkpoint_every.unwrap_or(0).to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values_with_comments() {
        let cfg = ExperimentConfig::parse(
            "# sphere run\ndomain = arm-100\nalgorithm = sep-cma-mae  # variant\nseeds = 1, 2,3\ngrid_dims = 50x40\n\nalpha=0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.domain.name(), "arm-100");
        assert_eq!(cfg.algorithm, EsKind::SepCma);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.grid_dims, vec![50, 40]);
        assert_eq!(cfg.alpha, 0.01);
        assert_eq!(cfg.psi, 5);
        assert_eq!(cfg.evaluation_budget(), 2_000_000);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::parse("algorithm = cma-me\n").unwrap_err();
        assert_eq!(err.field, "algorithm");
        let err = ExperimentConfig::parse("alpha = 2\n").unwrap_err();
        assert_eq!(err.field, "alpha");
        let err = ExperimentConfig::parse("psi = five\n").unwrap_err();
        assert_eq!(err.field, "psi");
        let err = ExperimentConfig::parse("colour = red\n").unwrap_err();
        assert_eq!(err.field, "colour");
        let err = ExperimentConfig::parse("seeds = 1,1\n").unwrap_err();
        assert_eq!(err.field, "seeds");
        let err = ExperimentConfig::parse("domain = maze\n").unwrap_err();
        assert_eq!(err.field, "domain");
    }

    #[test]
    fn flag_style_keys() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("--min-f", "-3").unwrap();
        cfg.set("--learning-rate", "0.1").unwrap();
        assert_eq!((cfg.min_f, cfg.learning_rate), (-3.0, 0.1));
    }

    #[test]
    fn kv_rendering_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.algorithm = EsKind::OpenAi;
        cfg.seeds = vec![4, 9];
        cfg.checkpoint_every = Some(100);
        assert_eq!(ExperimentConfig::parse(&cfg.to_kv_string()).unwrap(), cfg);
    }
}
