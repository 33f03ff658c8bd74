use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_finite, next_stall_count, EsError, RankedBatch};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// OpenAI-ES: an isotropic Gaussian with fixed `σ` whose mean follows Adam
/// on a centered-rank pseudo-gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenAiEs {
    mean: Vec<f64>,
    sigma: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    adam_step: u64,
    learning_rate: f64,
    l2_coeff: f64,
    batch_size: usize,
    generation: usize,
    stalled: usize,
}

impl OpenAiEs {
    pub fn new(mean: &[f64], sigma: f64, batch_size: usize, learning_rate: f64, l2_coeff: f64) -> Self {
        let n = mean.len();
        OpenAiEs {
            mean: mean.to_vec(),
            sigma,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            adam_step: 0,
            learning_rate,
            l2_coeff,
            batch_size,
            generation: 0,
            stalled: 0,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// The (never adapted) noise scale.
    pub fn step_size(&self) -> f64 {
        self.sigma
    }

    pub fn adam_step(&self) -> u64 {
        self.adam_step
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

    pub(crate) fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>, EsError> {
        if let Some(parameter) = self.first_non_finite() {
            return Err(EsError::NonFinite { parameter });
        }
        Ok((0..self.batch_size)
            .map(|_| {
                self.mean
                    .iter()
                    .map(|m| m + self.sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect())
    }

    pub(crate) fn tell(&mut self, batch: &RankedBatch) -> Result<(), EsError> {
        let n = self.mean.len();
        let lambda = batch.len();
        // Centered ranks: best → +0.5, worst → -0.5.
        // g = Σ uᵢ εᵢ / (λσ) with εᵢ = (xᵢ - m) / σ.
        let denom = (lambda - 1) as f64;
        let scale = 1.0 / (lambda as f64 * self.sigma * self.sigma);
        let mut gradient = vec![0.0; n];
        for (pos, x) in batch.ranked().enumerate() {
            let utility = (lambda - 1 - pos) as f64 / denom - 0.5;
            if utility == 0.0 {
                continue;
            }
            let coef = utility * scale;
            for ((g, xj), mj) in gradient.iter_mut().zip(x).zip(&self.mean) {
                *g += coef * (xj - mj);
            }
        }
        check_finite(&gradient, "solutions")?;

        // Adam minimizes, so step on the negated ascent direction plus the
        // L2 penalty on the mean.
        self.adam_step += 1;
        let t = self.adam_step as i32;
        let step = self.learning_rate * (1.0 - BETA2.powi(t)).sqrt() / (1.0 - BETA1.powi(t));
        for j in 0..n {
            let g = -gradient[j] + self.l2_coeff * self.mean[j];
            let m = BETA1 * self.first_moment[j] + (1.0 - BETA1) * g;
            let v = BETA2 * self.second_moment[j] + (1.0 - BETA2) * g * g;
            self.first_moment[j] = m;
            self.second_moment[j] = v;
            self.mean[j] -= step * m / (v.sqrt() + ADAM_EPS);
        }
        self.generation += 1;
        self.stalled = next_stall_count(self.stalled, batch);
        Ok(())
    }

    pub(crate) fn converged(&self) -> bool {
        false
    }

    pub(crate) fn reset(&mut self, mean: &[f64], sigma0: f64) {
        *self = OpenAiEs::new(mean, sigma0, self.batch_size, self.learning_rate, self.l2_coeff);
    }

    pub(crate) fn stored_reals(&self) -> usize {
        // mean, two Adam moments, σ, learning rate, L2 coefficient
        3 * self.mean.len() + 3
    }

    pub(crate) fn represented_covariance(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        DMatrix::identity(n, n) * (self.sigma * self.sigma)
    }

    pub(crate) fn first_non_finite(&self) -> Option<&'static str> {
        if !self.sigma.is_finite() {
            Some("sigma")
        } else if !self.mean.iter().all(|v| v.is_finite()) {
            Some("mean")
        } else if !self.first_moment.iter().all(|v| v.is_finite()) {
            Some("adam_first_moment")
        } else if !self.second_moment.iter().all(|v| v.is_finite()) {
            Some("adam_second_moment")
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_each_coordinate_by_learning_rate() {
        // With bias correction, the first Adam step has magnitude ≈ lr in
        // every coordinate with a non-zero gradient (up to the Adam epsilon).
        let mut es = OpenAiEs::new(&[0.0, 0.0], 1.0, 2, 0.01, 0.0);
        let xs = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let batch = RankedBatch::from_ranking(xs, vec![0, 1], 1).unwrap();
        es.tell(&batch).unwrap();
        assert!((es.mean()[0] - 0.01).abs() < 1e-7);
        assert!((es.mean()[1] + 0.01).abs() < 1e-7);
        assert_eq!(es.adam_step(), 1);
        assert_eq!(es.step_size(), 1.0);
    }
}
