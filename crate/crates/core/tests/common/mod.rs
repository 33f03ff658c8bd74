#![allow(dead_code)]

use cmamae::rng;
use cmamae::{EsParams, EsState, RankedBatch};

/// Fixed optimum used by the convergence checks; `‖c‖ ≤ 2`.
pub fn shifted_center(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.9 * ((i as f64 + 1.0) * 0.7).sin() / (n as f64).sqrt()).collect()
}

pub fn neg_sq_dist(x: &[f64], c: &[f64]) -> f64 {
    -x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Runs ask/tell on `-‖x - c‖²` from the origin until the best sample is
/// within `tol` of the optimum or `budget` evaluations are spent. Returns
/// `(best gap, evaluations used)`.
pub fn minimize_shifted(params: &EsParams, c: &[f64], tol: f64, budget: usize, seed: u64) -> (f64, usize) {
    let mut es = EsState::new(params, &vec![0.0; c.len()]).unwrap();
    let mut rng = rng::emitter_stream(seed, 0);
    let mut best = f64::NEG_INFINITY;
    let mut evals = 0;
    while evals < budget {
        let xs = es.ask(&mut rng).unwrap();
        evals += xs.len();
        let f: Vec<f64> = xs.iter().map(|x| neg_sq_dist(x, c)).collect();
        best = f.iter().copied().fold(best, f64::max);
        if -best <= tol {
            break;
        }
        let batch = RankedBatch::new(xs, &f, &f).unwrap();
        es.tell(&batch).unwrap();
    }
    (-best, evals)
}
