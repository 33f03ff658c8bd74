//! Benchmark domains: sphere linear projection and planar arm repertoire.
//!
//! Both map a parameter vector to an objective in `[0, 100]` and two
//! measures.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Sphere optimum per coordinate (`0.4 · 5.12`).
pub const SPHERE_OFFSET: f64 = 0.4 * 5.12;
/// Per-coordinate bound of the fold-clipped measure projection.
pub const SPHERE_MEASURE_BOUND: f64 = 5.12;

/// An evaluation problem usable by the scheduler. Implementations must be
/// pure and reentrant.
pub trait Domain: Sync {
    /// Length of a solution vector.
    fn dim(&self) -> usize;

    /// Objective and measures of `x`.
    fn evaluate(&self, x: &[f64]) -> (f64, Vec<f64>);

    /// Per-measure lower and upper bounds.
    fn measure_bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// Default initial solution `φ₀`.
    fn initial_solution(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// `f(x) = Σ (xᵢ - offset)²` normalized to `[0, 100]`, with measures given
/// by summing fold-clipped coordinates over each half of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereDomain {
    pub n: usize,
    pub offset: f64,
    pub measure_bound: f64,
}

impl SphereDomain {
    pub fn new(n: usize) -> Self {
        SphereDomain {
            n,
            offset: SPHERE_OFFSET,
            measure_bound: SPHERE_MEASURE_BOUND,
        }
    }

    /// `v` inside `[-b, b]`, otherwise folded back to `b² / v`.
    pub fn clip(&self, v: f64) -> f64 {
        let b = self.measure_bound;
        if v.abs() <= b {
            v
        } else {
            b * b / v
        }
    }

    /// Raw sphere value at the worst corner `x = -bound · 1`, the zero of
    /// the normalized objective.
    pub fn worst_raw(&self) -> f64 {
        self.n as f64 * (-self.measure_bound - self.offset).powi(2)
    }

    pub fn eval(&self, x: &[f64]) -> (f64, [f64; 2]) {
        let raw: f64 = x.iter().map(|v| (v - self.offset).powi(2)).sum();
        let worst = self.worst_raw();
        let objective = 100.0 * (worst - raw) / worst;
        let half = x.len() / 2;
        let m0: f64 = x[..half].iter().map(|&v| self.clip(v)).sum();
        let m1: f64 = x[half..].iter().map(|&v| self.clip(v)).sum();
        (objective, [m0, m1])
    }
}

impl Domain for SphereDomain {
    fn dim(&self) -> usize {
        self.n
    }

    fn evaluate(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (f, m) = self.eval(x);
        (f, m.to_vec())
    }

    fn measure_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let half = self.n as f64 / 2.0 * self.measure_bound;
        (vec![-half; 2], vec![half; 2])
    }
}

/// Planar arm of `n` links with total length 1. The objective rewards low
/// joint-angle variance; the measures are the end-effector position.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmDomain {
    pub n: usize,
    pub link_length: f64,
}

impl ArmDomain {
    pub fn new(n: usize) -> Self {
        ArmDomain {
            n,
            link_length: 1.0 / n as f64,
        }
    }

    /// Largest population variance of angles in `[-π, π]` (half at each end).
    pub const MAX_VARIANCE: f64 = PI * PI;

    pub fn eval(&self, theta: &[f64]) -> (f64, [f64; 2]) {
        let n = theta.len() as f64;
        let clipped = theta.iter().map(|t| t.clamp(-PI, PI));
        let mean = clipped.clone().sum::<f64>() / n;
        let variance = clipped.clone().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        let objective = 100.0 * (1.0 - variance / Self::MAX_VARIANCE);

        let (mut x, mut y, mut cumulative) = (0.0, 0.0, 0.0);
        for t in clipped {
            cumulative += t;
            x += self.link_length * cumulative.cos();
            y += self.link_length * cumulative.sin();
        }
        (objective, [x, y])
    }
}

impl Domain for ArmDomain {
    fn dim(&self) -> usize {
        self.n
    }

    fn evaluate(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (f, m) = self.eval(x);
        (f, m.to_vec())
    }

    fn measure_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-1.0; 2], vec![1.0; 2])
    }
}

/// Registered benchmark domains.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Sphere(SphereDomain),
    Arm(ArmDomain),
}

impl DomainKind {
    pub const NAMES: [&'static str; 4] = ["sphere-100", "sphere-1000", "arm-100", "arm-1000"];

    pub fn name(&self) -> String {
        match self {
            DomainKind::Sphere(d) => format!("sphere-{}", d.n),
            DomainKind::Arm(d) => format!("arm-{}", d.n),
        }
    }
}

impl FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sphere-100" => Ok(DomainKind::Sphere(SphereDomain::new(100))),
            "sphere-1000" => Ok(DomainKind::Sphere(SphereDomain::new(1000))),
            "arm-100" => Ok(DomainKind::Arm(ArmDomain::new(100))),
            "arm-1000" => Ok(DomainKind::Arm(ArmDomain::new(1000))),
            other => Err(format!(
                "unknown domain `{other}` (expected one of {})",
                Self::NAMES.join(", ")
            )),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Domain for DomainKind {
    fn dim(&self) -> usize {
        match self {
            DomainKind::Sphere(d) => d.dim(),
            DomainKind::Arm(d) => d.dim(),
        }
    }

    fn evaluate(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            DomainKind::Sphere(d) => d.evaluate(x),
            DomainKind::Arm(d) => d.evaluate(x),
        }
    }

    fn measure_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainKind::Sphere(d) => d.measure_bounds(),
            DomainKind::Arm(d) => d.measure_bounds(),
        }
    }
}
