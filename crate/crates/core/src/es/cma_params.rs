//! Default strategy parameters for CMA-ES and sep-CMA-ES.

/// Log-linear positive weights over the top `⌊λ/2⌋` candidates, normalized
/// to sum to one.
pub(crate) fn recombination_weights(lambda: usize) -> Vec<f64> {
    let mu = (lambda / 2).max(1);
    let base = (lambda as f64 + 1.0) / 2.0;
    let raw: Vec<f64> = (1..=mu).map(|i| base.ln() - (i as f64).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Variance-effective selection mass `1 / Σ wᵢ²`.
pub(crate) fn mu_eff(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Expected norm of an `n`-dimensional standard normal vector.
pub(crate) fn expected_normal_norm(n: usize) -> f64 {
    let n = n as f64;
    n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CmaConstants {
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaConstants {
    /// `diagonal` applies the `(n + 2) / 3` learning-rate boost used when
    /// only the diagonal of the covariance is adapted.
    pub fn new(n: usize, lambda: usize, diagonal: bool) -> Self {
        let weights = recombination_weights(lambda);
        let mu_eff = mu_eff(&weights);
        let nf = n as f64;

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let mut c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let mut c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff))
            .min(1.0 - c1);
        if diagonal {
            let boost = (nf + 2.0) / 3.0;
            c1 *= boost;
            c_mu *= boost;
            let total = c1 + c_mu;
            if total > 1.0 {
                c1 /= total;
                c_mu /= total;
            }
        }
        CmaConstants {
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n: expected_normal_norm(n),
        }
    }

    pub fn mu(&self) -> usize {
        self.weights.len()
    }

    /// `h_σ` stall indicator for the rank-one path after `generation`
    /// updates (1-based).
    pub fn h_sigma(&self, path_sigma_norm: f64, generation: usize, n: usize) -> bool {
        let decay = 1.0 - (1.0 - self.c_sigma).powf(2.0 * generation as f64);
        path_sigma_norm / decay.sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * self.chi_n
    }
}
