use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::cma_params::CmaConstants;
use super::{
    check_finite, next_stall_count, EsError, RankedBatch, MAX_CONDITION, MIN_STEP_SIZE,
    VARIANCE_FLOOR,
};

/// Full-covariance CMA-ES with rank-one and rank-μ updates and cumulative
/// step-size adaptation.
///
/// Sampling uses a cached symmetric square root `C^{1/2}`, refreshed every
/// `max(1, ⌊n/λ⌋)` generations so the eigendecomposition amortizes to
/// `O(n²)` per sampled solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCma {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    step_size: f64,
    path_sigma: DVector<f64>,
    path_cov: DVector<f64>,
    consts: CmaConstants,
    batch_size: usize,
    sqrt_cov: DMatrix<f64>,
    inv_sqrt_cov: DMatrix<f64>,
    condition: f64,
    decomposed_at: usize,
    generation: usize,
    stalled: usize,
}

impl FullCma {
    pub fn new(mean: &[f64], sigma0: f64, batch_size: usize) -> Self {
        let n = mean.len();
        FullCma {
            mean: DVector::from_column_slice(mean),
            covariance: DMatrix::identity(n, n),
            step_size: sigma0,
            path_sigma: DVector::zeros(n),
            path_cov: DVector::zeros(n),
            consts: CmaConstants::new(n, batch_size, false),
            batch_size,
            sqrt_cov: DMatrix::identity(n, n),
            inv_sqrt_cov: DMatrix::identity(n, n),
            condition: 1.0,
            decomposed_at: 0,
            generation: 0,
            stalled: 0,
        }
    }

    /// Builds a state with an explicit covariance matrix `C` (the sampling
    /// covariance is `σ² C`).
    pub fn with_covariance(
        mean: &[f64],
        sigma0: f64,
        batch_size: usize,
        covariance: DMatrix<f64>,
    ) -> Result<Self, EsError> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(EsError::Dimension {
                expected: n,
                actual: covariance.nrows(),
            });
        }
        let mut es = FullCma::new(mean, sigma0, batch_size);
        es.covariance = covariance;
        es.symmetrize();
        if es.covariance.clone().cholesky().is_none() {
            return Err(EsError::InvalidParameter {
                name: "covariance",
                reason: "must be symmetric positive definite".into(),
            });
        }
        es.decompose();
        Ok(es)
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
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

    /// Condition number of `C` at the last eigendecomposition.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Recombination weights over the full batch; zero past the top half.
    pub fn recombination_weights(&self) -> Vec<f64> {
        let mut w = self.consts.weights.clone();
        w.resize(self.batch_size, 0.0);
        w
    }

    fn decomposition_interval(&self) -> usize {
        (self.mean.len() / self.batch_size).max(1)
    }

    pub(crate) fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>, EsError> {
        if let Some(parameter) = self.first_non_finite() {
            return Err(EsError::NonFinite { parameter });
        }
        let n = self.mean.len();
        let mut z = DMatrix::<f64>::zeros(n, self.batch_size);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let y = &self.sqrt_cov * z;
        Ok(y.column_iter()
            .map(|col| {
                self.mean
                    .iter()
                    .zip(col.iter())
                    .map(|(m, d)| m + self.step_size * d)
                    .collect()
            })
            .collect())
    }

    pub(crate) fn tell(&mut self, batch: &RankedBatch) -> Result<(), EsError> {
        let n = self.mean.len();
        let mu = self.consts.mu();
        let sigma = self.step_size;

        // Rows of `steps` are √wᵢ·yᵢ for the top μ candidates, yᵢ = (xᵢ - m)/σ.
        let mut steps = DMatrix::<f64>::zeros(mu, n);
        let mut y_w = DVector::<f64>::zeros(n);
        for (rank, x) in batch.ranked().take(mu).enumerate() {
            let w = self.consts.weights[rank];
            let sw = w.sqrt();
            for j in 0..n {
                let y = (x[j] - self.mean[j]) / sigma;
                y_w[j] += w * y;
                steps[(rank, j)] = sw * y;
            }
        }
        check_finite(y_w.as_slice(), "solutions")?;

        self.mean.axpy(sigma, &y_w, 1.0);
        self.generation += 1;

        let c = &self.consts;
        let whitened = &self.inv_sqrt_cov * &y_w;
        self.path_sigma.axpy(
            (c.c_sigma * (2.0 - c.c_sigma) * c.mu_eff).sqrt(),
            &whitened,
            1.0 - c.c_sigma,
        );
        let ps_norm = self.path_sigma.norm();
        let h_sigma = c.h_sigma(ps_norm, self.generation, n);
        let h = if h_sigma { 1.0 } else { 0.0 };
        self.path_cov.axpy(
            h * (c.c_c * (2.0 - c.c_c) * c.mu_eff).sqrt(),
            &y_w,
            1.0 - c.c_c,
        );

        let delta_h = (1.0 - h) * c.c_c * (2.0 - c.c_c);
        let decay = 1.0 - c.c1 - c.c_mu + c.c1 * delta_h;
        self.covariance.gemm_tr(c.c_mu, &steps, &steps, decay);
        self.covariance.ger(c.c1, &self.path_cov, &self.path_cov, 1.0);
        self.symmetrize();

        let c = &self.consts;
        self.step_size *= ((c.c_sigma / c.d_sigma) * (ps_norm / c.chi_n - 1.0)).exp();
        self.stalled = next_stall_count(self.stalled, batch);

        if self.generation - self.decomposed_at >= self.decomposition_interval() {
            self.decompose();
        }
        Ok(())
    }

    pub(crate) fn converged(&self) -> bool {
        self.step_size < MIN_STEP_SIZE || !(self.condition <= MAX_CONDITION)
    }

    pub(crate) fn reset(&mut self, mean: &[f64], sigma0: f64) {
        *self = FullCma::new(mean, sigma0, self.batch_size);
    }

    pub(crate) fn stored_reals(&self) -> usize {
        let n = self.mean.len();
        // mean, two paths, C, C^{1/2}, C^{-1/2}, weights, σ
        3 * n + 3 * n * n + self.batch_size + 1
    }

    pub(crate) fn represented_covariance(&self) -> DMatrix<f64> {
        &self.covariance * (self.step_size * self.step_size)
    }

    pub(crate) fn first_non_finite(&self) -> Option<&'static str> {
        if !self.step_size.is_finite() {
            Some("step_size")
        } else if !self.mean.iter().all(|v| v.is_finite()) {
            Some("mean")
        } else if !self.path_sigma.iter().all(|v| v.is_finite()) {
            Some("evo_path_sigma")
        } else if !self.path_cov.iter().all(|v| v.is_finite()) {
            Some("evo_path_cov")
        } else if !self.covariance.iter().all(|v| v.is_finite()) {
            Some("covariance")
        } else if !self.sqrt_cov.iter().all(|v| v.is_finite()) {
            Some("transform_cache")
        } else {
            None
        }
    }

    fn symmetrize(&mut self) {
        let n = self.covariance.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.covariance[(i, j)] + self.covariance[(j, i)]);
                self.covariance[(i, j)] = v;
                self.covariance[(j, i)] = v;
            }
        }
    }

    fn decompose(&mut self) {
        self.decomposed_at = self.generation;
        if !self.covariance.iter().all(|v| v.is_finite()) {
            self.condition = f64::INFINITY;
            return;
        }
        let eigen = SymmetricEigen::new(self.covariance.clone());
        let values: Vec<f64> = eigen.eigenvalues.iter().map(|v| v.max(VARIANCE_FLOOR)).collect();
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        self.condition = max / min;
        let basis = &eigen.eigenvectors;
        let mut scaled = basis.clone();
        let mut inv_scaled = basis.clone();
        for (k, &v) in values.iter().enumerate() {
            let s = v.sqrt();
            scaled.column_mut(k).scale_mut(s);
            inv_scaled.column_mut(k).scale_mut(1.0 / s);
        }
        self.sqrt_cov = &scaled * basis.transpose();
        self.inv_sqrt_cov = &inv_scaled * basis.transpose();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut es = FullCma::new(&[1.0; 6], 0.5, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..60 {
            let xs = es.ask(&mut rng).unwrap();
            let f: Vec<f64> = xs.iter().map(|x| -x.iter().map(|v| v * v).sum::<f64>()).collect();
            let batch = RankedBatch::new(xs, &f, &f).unwrap();
            es.tell(&batch).unwrap();
            let c = es.covariance();
            for i in 0..6 {
                for j in 0..6 {
                    let scale = c[(i, j)].abs().max(c[(j, i)].abs()).max(1e-300);
                    assert!((c[(i, j)] - c[(j, i)]).abs() / scale <= 1e-12);
                }
            }
            assert!(c.clone().cholesky().is_some());
            assert!(es.step_size() > 0.0);
        }
    }

    #[test]
    fn decomposition_is_amortized() {
        let mut es = FullCma::new(&[0.0; 100], 0.5, 40);
        assert_eq!(es.decomposition_interval(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = es.ask(&mut rng).unwrap();
        let f: Vec<f64> = (0..40).map(|i| i as f64).collect();
        es.tell(&RankedBatch::new(xs, &f, &f).unwrap()).unwrap();
        // One generation in, the sampling transform is still the identity.
        assert_eq!(es.sqrt_cov, DMatrix::identity(100, 100));
        let xs = es.ask(&mut rng).unwrap();
        es.tell(&RankedBatch::new(xs, &f, &f).unwrap()).unwrap();
        assert_ne!(es.sqrt_cov, DMatrix::identity(100, 100));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(FullCma::with_covariance(&[0.0, 0.0], 1.0, 4, c).is_err());
    }

    #[test]
    fn ask_reports_non_finite_parameter() {
        let mut es = FullCma::new(&[0.0; 3], 1.0, 4);
        es.step_size = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            es.ask(&mut rng),
            Err(EsError::NonFinite { parameter: "step_size" })
        );
    }
}
