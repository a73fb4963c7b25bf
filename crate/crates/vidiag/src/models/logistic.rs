//! Logistic regression `y ~ Bernoulli(logit⁻¹(Xβ))` with a flat prior on β.
//!
//! The design matrix is drawn from `N(0, (1-ρ)I + ρ11ᵀ)`, so `ρ` controls
//! the correlation between regressors — and through it the posterior
//! correlation a mean-field family cannot represent.
//!
//! The flat prior is improper, which calibration replications cannot sample
//! from; for that purpose [`Model::sample_prior`] substitutes a proper
//! `N(0, 2²)` prior. This is a documented deviation used only where a prior
//! draw is required (VSBC); the log-joint keeps the flat prior.

use super::density::{ln1p_exp, sigmoid};
use super::{Model, Transform};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

/// Standard deviation of the proper prior substituted for prior sampling.
pub const VSBC_PRIOR_SD: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct LogisticRegression {
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    coef_dim: usize,
    rho: f64,
}

impl LogisticRegression {
    pub fn from_design(x: Vec<Vec<f64>>, y: Vec<u8>, rho: f64) -> crate::Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(crate::Error::LengthMismatch(format!(
                "design rows ({}) and responses ({})",
                x.len(),
                y.len()
            )));
        }
        let coef_dim = x[0].len();
        if coef_dim == 0 || x.iter().any(|row| row.len() != coef_dim) {
            return Err(crate::Error::InvalidParameter(
                "design rows must be non-empty and of equal length".into(),
            ));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(crate::Error::InvalidParameter(
                "responses must be 0/1".into(),
            ));
        }
        Ok(Self { x, y, coef_dim, rho })
    }

    /// Correlated design: each row is `sqrt(1-ρ)·ε + sqrt(ρ)·g·1` with
    /// shared `g`, giving covariance `(1-ρ)I + ρ11ᵀ`.
    pub fn correlated_design(n: usize, coef_dim: usize, rho: f64, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let shared: f64 = StandardNormal.sample(rng);
                (0..coef_dim)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(rng);
                        (1.0 - rho).sqrt() * e + rho.sqrt() * shared
                    })
                    .collect()
            })
            .collect()
    }

    /// Fresh correlated design with responses simulated from `true_beta`.
    pub fn synthetic(
        n: usize,
        coef_dim: usize,
        rho: f64,
        true_beta: &[f64],
        rng: &mut dyn RngCore,
    ) -> crate::Result<Self> {
        if true_beta.len() != coef_dim {
            return Err(crate::Error::LengthMismatch(format!(
                "true_beta ({}) and coef_dim ({coef_dim})",
                true_beta.len()
            )));
        }
        let x = Self::correlated_design(n, coef_dim, rho, rng);
        let mut model = Self::from_design(x, vec![0; n], rho)?;
        model.resample_y(true_beta, rng);
        Ok(model)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn resample_y(&mut self, beta: &[f64], rng: &mut dyn RngCore) {
        for (i, row) in self.x.iter().enumerate() {
            let eta: f64 = row.iter().zip(beta).map(|(xij, b)| xij * b).sum();
            self.y[i] = u8::from(rng.random::<f64>() < sigmoid(eta));
        }
    }

    /// Mean log posterior-predictive density of this dataset under the given
    /// posterior draws: `(1/n) Σ_i ln[(1/S) Σ_s p(y_i | x_i, β_s)]`.
    pub fn mean_lpd(&self, draws: &[Vec<f64>]) -> f64 {
        let s = draws.len() as f64;
        let mut total = 0.0;
        for (row, &yi) in self.x.iter().zip(&self.y) {
            let mut acc = 0.0;
            for beta in draws {
                let eta: f64 = row.iter().zip(beta).map(|(xij, b)| xij * b).sum();
                let lp = f64::from(yi) * eta - ln1p_exp(eta);
                acc += lp.exp();
            }
            total += (acc / s).ln();
        }
        total / self.y.len() as f64
    }
}

impl Model for LogisticRegression {
    fn dim(&self) -> usize {
        self.coef_dim
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.coef_dim).map(|i| format!("beta{i}")).collect()
    }

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity; self.coef_dim]
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        // flat prior: the log-joint is the log-likelihood
        let mut ll = 0.0;
        for (row, &yi) in self.x.iter().zip(&self.y) {
            let eta: f64 = row.iter().zip(z).map(|(xij, b)| xij * b).sum();
            ll += f64::from(yi) * eta - ln1p_exp(eta);
        }
        ll
    }

    fn grad_log_joint(&self, z: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.coef_dim];
        for (row, &yi) in self.x.iter().zip(&self.y) {
            let eta: f64 = row.iter().zip(z).map(|(xij, b)| xij * b).sum();
            let r = f64::from(yi) - sigmoid(eta);
            for (g, xij) in grad.iter_mut().zip(row) {
                *g += r * xij;
            }
        }
        grad
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.coef_dim)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                VSBC_PRIOR_SD * e
            })
            .collect()
    }

    fn simulate_data(&self, theta: &[f64], rng: &mut dyn RngCore) -> Box<dyn Model> {
        let mut m = self.clone();
        m.resample_y(theta, rng);
        Box::new(m)
    }
}
