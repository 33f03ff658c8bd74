use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::cma_params::{mu_eff, recombination_weights};
use super::{check_finite, next_stall_count, EsError, RankedBatch, MIN_STEP_SIZE};

/// Limited-memory matrix adaptation ES (LM-MA-ES).
///
/// The transformation matrix is never formed. A standard-normal draw `z` is
/// pushed through `k` rank-one maps
/// `d ← (1 - c_d,j) d + c_d,j M_j (M_jᵀ d)`, one per stored direction `M_j`,
/// so sampling and adaptation cost `O(kn)` per solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LmMa {
    mean: Vec<f64>,
    directions: Vec<Vec<f64>>,
    /// Decay rate `c_d,j = 1 / (1.5^j n)` of each rank-one map.
    decay_rates: Vec<f64>,
    /// Learning rate `c_c,j = λ / (4^j n)` of each direction vector.
    learning_rates: Vec<f64>,
    step_size: f64,
    path_sigma: Vec<f64>,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    batch_size: usize,
    generation: usize,
    stalled: usize,
}

impl LmMa {
    pub fn new(mean: &[f64], sigma0: f64, batch_size: usize, k: usize) -> Self {
        let n = mean.len();
        let nf = n as f64;
        let lambda = batch_size as f64;
        let weights = recombination_weights(batch_size);
        LmMa {
            mean: mean.to_vec(),
            directions: vec![vec![0.0; n]; k],
            decay_rates: (0..k)
                .map(|j| (1.0 / (1.5f64.powi(j as i32) * nf)).min(0.5))
                .collect(),
            learning_rates: (0..k)
                .map(|j| (lambda / (4f64.powi(j as i32) * nf)).min(1.0))
                .collect(),
            step_size: sigma0,
            path_sigma: vec![0.0; n],
            mu_eff: mu_eff(&weights),
            weights,
            c_sigma: (2.0 * lambda / nf).min(1.0),
            batch_size,
            generation: 0,
            stalled: 0,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub(crate) fn stalled(&self) -> usize {
        self.stalled
    }

    fn active(&self) -> usize {
        self.generation.min(self.directions.len())
    }

    /// Applies the rank-one maps in order, in place.
    fn transform(&self, d: &mut [f64]) {
        for j in 0..self.active() {
            let m = &self.directions[j];
            let c = self.decay_rates[j];
            let proj = c * dot(m, d);
            for (di, mi) in d.iter_mut().zip(m) {
                *di = (1.0 - c) * *di + proj * mi;
            }
        }
    }

    /// Inverse of [`transform`](Self::transform); each map
    /// `(1 - c) I + c m mᵀ` is inverted with Sherman–Morrison.
    fn inverse_transform(&self, d: &mut [f64]) {
        for j in (0..self.active()).rev() {
            let m = &self.directions[j];
            let c = self.decay_rates[j];
            let denom = (1.0 - c) + c * dot(m, m);
            let proj = c * dot(m, d) / denom;
            for (di, mi) in d.iter_mut().zip(m) {
                *di = (*di - proj * mi) / (1.0 - c);
            }
        }
    }

    pub(crate) fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>, EsError> {
        if let Some(parameter) = self.first_non_finite() {
            return Err(EsError::NonFinite { parameter });
        }
        let n = self.mean.len();
        let mut out = Vec::with_capacity(self.batch_size);
        let mut d = vec![0.0; n];
        for _ in 0..self.batch_size {
            for v in d.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            self.transform(&mut d);
            out.push(
                self.mean
                    .iter()
                    .zip(&d)
                    .map(|(m, di)| m + self.step_size * di)
                    .collect(),
            );
        }
        Ok(out)
    }

    pub(crate) fn tell(&mut self, batch: &RankedBatch) -> Result<(), EsError> {
        let n = self.mean.len();
        let sigma = self.step_size;
        let mut d_w = vec![0.0; n];
        for (rank, x) in batch.ranked().take(self.weights.len()).enumerate() {
            let w = self.weights[rank];
            for j in 0..n {
                d_w[j] += w * (x[j] - self.mean[j]) / sigma;
            }
        }
        check_finite(&d_w, "solutions")?;

        // The rank-one maps are linear, so the weighted sum of the
        // underlying standard-normal draws is T⁻¹ d_w.
        let mut z_w = d_w.clone();
        self.inverse_transform(&mut z_w);

        for j in 0..n {
            self.mean[j] += sigma * d_w[j];
        }
        let cs = self.c_sigma;
        let ps_coeff = (self.mu_eff * cs * (2.0 - cs)).sqrt();
        for (p, z) in self.path_sigma.iter_mut().zip(&z_w) {
            *p = (1.0 - cs) * *p + ps_coeff * z;
        }
        for (m, &cc) in self.directions.iter_mut().zip(&self.learning_rates) {
            let coeff = (self.mu_eff * cc * (2.0 - cc)).sqrt();
            for (mi, z) in m.iter_mut().zip(&z_w) {
                *mi = (1.0 - cc) * *mi + coeff * z;
            }
        }
        let ps_sq: f64 = self.path_sigma.iter().map(|p| p * p).sum();
        self.step_size *= (0.5 * cs * (ps_sq / n as f64 - 1.0)).exp();
        self.generation += 1;
        self.stalled = next_stall_count(self.stalled, batch);
        Ok(())
    }

    pub(crate) fn converged(&self) -> bool {
        self.step_size < MIN_STEP_SIZE
    }

    pub(crate) fn reset(&mut self, mean: &[f64], sigma0: f64) {
        *self = LmMa::new(mean, sigma0, self.batch_size, self.directions.len());
    }

    pub(crate) fn stored_reals(&self) -> usize {
        let n = self.mean.len();
        let k = self.directions.len();
        // mean, path, k directions, 2k rates, weights, σ
        2 * n + k * n + 2 * k + self.weights.len() + 1
    }

    /// `σ² T Tᵀ` with `T` materialized column by column.
    pub(crate) fn represented_covariance(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        let mut t = DMatrix::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[col] = 1.0;
            self.transform(&mut e);
            for row in 0..n {
                t[(row, col)] = e[row];
            }
        }
        (&t * t.transpose()) * (self.step_size * self.step_size)
    }

    pub(crate) fn first_non_finite(&self) -> Option<&'static str> {
        if !self.step_size.is_finite() {
            Some("step_size")
        } else if !self.mean.iter().all(|v| v.is_finite()) {
            Some("mean")
        } else if !self.path_sigma.iter().all(|v| v.is_finite()) {
            Some("evo_path_sigma")
        } else if !self.directions.iter().flatten().all(|v| v.is_finite()) {
            Some("direction_vectors")
        } else {
            None
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adapted(n: usize, k: usize, gens: usize) -> LmMa {
        let mut es = LmMa::new(&vec![1.0; n], 0.3, 10, k);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..gens {
            let xs = es.ask(&mut rng).unwrap();
            let f: Vec<f64> = xs.iter().map(|x| -(x[0] * 10.0).powi(2) - x[1..].iter().map(|v| v * v).sum::<f64>()).collect();
            es.tell(&RankedBatch::new(xs, &f, &f).unwrap()).unwrap();
        }
        es
    }

    #[test]
    fn inverse_undoes_transform() {
        let es = adapted(12, 4, 30);
        let original: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut v = original.clone();
        es.transform(&mut v);
        assert_ne!(v, original);
        es.inverse_transform(&mut v);
        for (a, b) in v.iter().zip(&original) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn direction_count_is_fixed() {
        let es = adapted(12, 4, 30);
        assert_eq!(es.directions().len(), 4);
        assert!(es.directions().iter().all(|m| m.len() == 12));
    }
}
