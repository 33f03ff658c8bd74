use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::cma_params::CmaConstants;
use super::{check_finite, next_stall_count, EsError, RankedBatch, MIN_STEP_SIZE, VARIANCE_FLOOR};

/// Separable CMA-ES: CMA-ES restricted to a diagonal covariance, with the
/// covariance learning rates scaled up by `(n + 2) / 3`. Everything is
/// `O(n)` per sampled solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SepCma {
    mean: Vec<f64>,
    diag_variance: Vec<f64>,
    step_size: f64,
    path_sigma: Vec<f64>,
    path_cov: Vec<f64>,
    consts: CmaConstants,
    batch_size: usize,
    generation: usize,
    stalled: usize,
}

impl SepCma {
    pub fn new(mean: &[f64], sigma0: f64, batch_size: usize) -> Self {
        let n = mean.len();
        SepCma {
            mean: mean.to_vec(),
            diag_variance: vec![1.0; n],
            step_size: sigma0,
            path_sigma: vec![0.0; n],
            path_cov: vec![0.0; n],
            consts: CmaConstants::new(n, batch_size, true),
            batch_size,
            generation: 0,
            stalled: 0,
        }
    }

    /// State with explicit diagonal variances (sampling covariance is
    /// `σ² diag(v)`).
    pub fn with_variances(
        mean: &[f64],
        sigma0: f64,
        batch_size: usize,
        variances: &[f64],
    ) -> Result<Self, EsError> {
        if variances.len() != mean.len() {
            return Err(EsError::Dimension {
                expected: mean.len(),
                actual: variances.len(),
            });
        }
        if !variances.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(EsError::InvalidParameter {
                name: "diag_variance",
                reason: "entries must be finite and > 0".into(),
            });
        }
        let mut es = SepCma::new(mean, sigma0, batch_size);
        es.diag_variance = variances.to_vec();
        Ok(es)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn diag_variance(&self) -> &[f64] {
        &self.diag_variance
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

    fn std_devs(&self) -> impl Iterator<Item = f64> + '_ {
        self.diag_variance.iter().map(|v| v.max(VARIANCE_FLOOR).sqrt())
    }

    pub(crate) fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>, EsError> {
        if let Some(parameter) = self.first_non_finite() {
            return Err(EsError::NonFinite { parameter });
        }
        let scales: Vec<f64> = self.std_devs().map(|d| d * self.step_size).collect();
        Ok((0..self.batch_size)
            .map(|_| {
                self.mean
                    .iter()
                    .zip(&scales)
                    .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect())
    }

    pub(crate) fn tell(&mut self, batch: &RankedBatch) -> Result<(), EsError> {
        let n = self.mean.len();
        let sigma = self.step_size;
        let c = &self.consts;

        let mut y_w = vec![0.0; n];
        let mut rank_mu = vec![0.0; n];
        for (rank, x) in batch.ranked().take(c.mu()).enumerate() {
            let w = c.weights[rank];
            for j in 0..n {
                let y = (x[j] - self.mean[j]) / sigma;
                y_w[j] += w * y;
                rank_mu[j] += w * y * y;
            }
        }
        check_finite(&y_w, "solutions")?;

        self.generation += 1;
        let ps_coeff = (c.c_sigma * (2.0 - c.c_sigma) * c.mu_eff).sqrt();
        let mut ps_sq = 0.0;
        for j in 0..n {
            self.mean[j] += sigma * y_w[j];
            let d = self.diag_variance[j].max(VARIANCE_FLOOR).sqrt();
            let p = (1.0 - c.c_sigma) * self.path_sigma[j] + ps_coeff * y_w[j] / d;
            self.path_sigma[j] = p;
            ps_sq += p * p;
        }
        let ps_norm = ps_sq.sqrt();
        let h = if c.h_sigma(ps_norm, self.generation, n) { 1.0 } else { 0.0 };
        let pc_coeff = h * (c.c_c * (2.0 - c.c_c) * c.mu_eff).sqrt();
        let delta_h = (1.0 - h) * c.c_c * (2.0 - c.c_c);
        let decay = 1.0 - c.c1 - c.c_mu + c.c1 * delta_h;
        for j in 0..n {
            let p = (1.0 - c.c_c) * self.path_cov[j] + pc_coeff * y_w[j];
            self.path_cov[j] = p;
            let v = decay * self.diag_variance[j] + c.c1 * p * p + c.c_mu * rank_mu[j];
            self.diag_variance[j] = v.max(VARIANCE_FLOOR);
        }

        self.step_size *= ((c.c_sigma / c.d_sigma) * (ps_norm / c.chi_n - 1.0)).exp();
        self.stalled = next_stall_count(self.stalled, batch);
        Ok(())
    }

    pub(crate) fn converged(&self) -> bool {
        self.step_size < MIN_STEP_SIZE
    }

    pub(crate) fn reset(&mut self, mean: &[f64], sigma0: f64) {
        *self = SepCma::new(mean, sigma0, self.batch_size);
    }

    pub(crate) fn stored_reals(&self) -> usize {
        // mean, variances, two paths, weights, σ
        4 * self.mean.len() + self.batch_size + 1
    }

    pub(crate) fn represented_covariance(&self) -> DMatrix<f64> {
        let s2 = self.step_size * self.step_size;
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.diag_variance.len(),
            self.diag_variance.iter().map(|v| v.max(VARIANCE_FLOOR) * s2),
        ))
    }

    pub(crate) fn first_non_finite(&self) -> Option<&'static str> {
        if !self.step_size.is_finite() {
            Some("step_size")
        } else if !self.mean.iter().all(|v| v.is_finite()) {
            Some("mean")
        } else if !self.diag_variance.iter().all(|v| v.is_finite()) {
            Some("diag_variance")
        } else if !self.path_sigma.iter().all(|v| v.is_finite()) {
            Some("evo_path_sigma")
        } else if !self.path_cov.iter().all(|v| v.is_finite()) {
            Some("evo_path_cov")
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn variances_stay_positive() {
        let mut es = SepCma::new(&[3.0; 8], 1.0, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let xs = es.ask(&mut rng).unwrap();
            let f: Vec<f64> = xs
                .iter()
                .map(|x| -x.iter().enumerate().map(|(i, v)| 10f64.powi(i as i32 % 4) * v * v).sum::<f64>())
                .collect();
            es.tell(&RankedBatch::new(xs, &f, &f).unwrap()).unwrap();
            assert!(es.diag_variance().iter().all(|v| *v > 0.0));
            assert!(es.step_size() > 0.0);
        }
    }

    #[test]
    fn rejects_non_positive_variances() {
        assert!(SepCma::with_variances(&[0.0, 0.0], 1.0, 4, &[1.0, 0.0]).is_err());
        assert!(SepCma::with_variances(&[0.0, 0.0], 1.0, 4, &[1.0]).is_err());
    }
}
