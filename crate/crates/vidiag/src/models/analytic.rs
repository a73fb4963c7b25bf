//! Analytic targets used as oracles.
//!
//! These models have closed-form posteriors (or *are* the posterior), so
//! diagnostics run against them can be checked against exact values: the
//! Gaussian scale-mismatch family has a closed-form tail shape
//! `k = 1 - σ_q² / σ_p²`, the correlated bivariate Gaussian has known
//! marginals, and the conjugate normal-mean model has a closed-form
//! posterior and evidence.

use super::density::{ln_normal, LN_2PI};
use super::{Model, Transform};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Product of independent normals `N(mean_i, sd_i²)` as a data-free target.
#[derive(Debug, Clone)]
pub struct AnalyticGaussian {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl AnalyticGaussian {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> crate::Result<Self> {
        if mean.len() != sd.len() {
            return Err(crate::Error::LengthMismatch(format!(
                "mean ({}) and sd ({})",
                mean.len(),
                sd.len()
            )));
        }
        if sd.iter().any(|&s| !(s > 0.0)) {
            return Err(crate::Error::InvalidParameter(
                "standard deviations must be positive".into(),
            ));
        }
        Ok(Self { mean, sd })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            sd: vec![1.0; dim],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }
}

impl Model for AnalyticGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("theta{i}")).collect()
    }

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity; self.dim()]
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((&zi, &m), &s)| ln_normal(zi, m, s))
            .sum()
    }

    fn grad_log_joint(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((&zi, &m), &s)| -(zi - m) / (s * s))
            .collect()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.sd)
            .map(|(&m, &s)| {
                let e: f64 = StandardNormal.sample(rng);
                m + s * e
            })
            .collect()
    }

    fn simulate_data(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> Box<dyn Model> {
        // data-free target: the "posterior" is the model itself
        Box::new(self.clone())
    }

    fn marginal_log_density(&self, i: usize, value: f64) -> Option<f64> {
        Some(ln_normal(value, self.mean[i], self.sd[i]))
    }
}

/// Zero-mean bivariate Gaussian with unit marginal variances and
/// correlation `rho`.
#[derive(Debug, Clone)]
pub struct CorrelatedGaussian2d {
    rho: f64,
}

impl CorrelatedGaussian2d {
    pub fn new(rho: f64) -> crate::Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "correlation must be in (-1, 1), got {rho}"
            )));
        }
        Ok(Self { rho })
    }

    /// Conditional standard deviation `sqrt(1 - rho²)` of one coordinate
    /// given the other — the variance a mean-field KL(q‖p) minimizer
    /// recovers, not the marginal one.
    pub fn conditional_sd(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

impl Model for CorrelatedGaussian2d {
    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta1".into(), "theta2".into()]
    }

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity; 2]
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        let om = 1.0 - self.rho * self.rho;
        let quad = (z[0] * z[0] - 2.0 * self.rho * z[0] * z[1] + z[1] * z[1]) / om;
        -LN_2PI - 0.5 * om.ln() - 0.5 * quad
    }

    fn grad_log_joint(&self, z: &[f64]) -> Vec<f64> {
        let om = 1.0 - self.rho * self.rho;
        vec![
            -(z[0] - self.rho * z[1]) / om,
            -(z[1] - self.rho * z[0]) / om,
        ]
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let e1: f64 = StandardNormal.sample(rng);
        let e2: f64 = StandardNormal.sample(rng);
        vec![e1, self.rho * e1 + self.conditional_sd() * e2]
    }

    fn simulate_data(&self, _theta: &[f64], _rng: &mut dyn RngCore) -> Box<dyn Model> {
        Box::new(self.clone())
    }

    fn marginal_log_density(&self, _i: usize, value: f64) -> Option<f64> {
        Some(ln_normal(value, 0.0, 1.0))
    }
}

/// Conjugate normal-mean model: `theta ~ N(m0, s0²)`,
/// `y_i | theta ~ N(theta, s²)` with known noise scale.
#[derive(Debug, Clone)]
pub struct ConjugateNormal {
    prior_mean: f64,
    prior_sd: f64,
    noise_sd: f64,
    y: Vec<f64>,
}

impl ConjugateNormal {
    pub fn new(prior_mean: f64, prior_sd: f64, noise_sd: f64, y: Vec<f64>) -> crate::Result<Self> {
        if !(prior_sd > 0.0) || !(noise_sd > 0.0) {
            return Err(crate::Error::InvalidParameter(
                "scales must be positive".into(),
            ));
        }
        if y.is_empty() {
            return Err(crate::Error::InvalidParameter(
                "conjugate model needs at least one observation".into(),
            ));
        }
        Ok(Self {
            prior_mean,
            prior_sd,
            noise_sd,
            y,
        })
    }

    /// Exact posterior `(mean, sd)`.
    pub fn posterior(&self) -> (f64, f64) {
        let n = self.y.len() as f64;
        let prec0 = 1.0 / (self.prior_sd * self.prior_sd);
        let prec = n / (self.noise_sd * self.noise_sd);
        let var = 1.0 / (prec0 + prec);
        let sum_y: f64 = self.y.iter().sum();
        let mean = var * (self.prior_mean * prec0 + sum_y / (self.noise_sd * self.noise_sd));
        (mean, var.sqrt())
    }

    /// Closed-form log marginal likelihood `log p(y)`.
    pub fn log_evidence(&self) -> f64 {
        let n = self.y.len() as f64;
        let s2 = self.noise_sd * self.noise_sd;
        let s02 = self.prior_sd * self.prior_sd;
        let (post_mean, post_sd) = self.posterior();
        let post_var = post_sd * post_sd;
        let sum_y2: f64 = self.y.iter().map(|v| v * v).sum();
        // completed-square form of the Gaussian integral
        -0.5 * n * (LN_2PI + s2.ln()) - 0.5 * (LN_2PI + s02.ln()) + 0.5 * (LN_2PI + post_var.ln())
            - 0.5
                * (sum_y2 / s2 + self.prior_mean * self.prior_mean / s02
                    - post_mean * post_mean / post_var)
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }
}

impl Model for ConjugateNormal {
    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity]
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        let theta = z[0];
        let mut lp = ln_normal(theta, self.prior_mean, self.prior_sd);
        for &yi in &self.y {
            lp += ln_normal(yi, theta, self.noise_sd);
        }
        lp
    }

    fn grad_log_joint(&self, z: &[f64]) -> Vec<f64> {
        let theta = z[0];
        let mut g = -(theta - self.prior_mean) / (self.prior_sd * self.prior_sd);
        let s2 = self.noise_sd * self.noise_sd;
        for &yi in &self.y {
            g += (yi - theta) / s2;
        }
        vec![g]
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let e: f64 = StandardNormal.sample(rng);
        vec![self.prior_mean + self.prior_sd * e]
    }

    fn simulate_data(&self, theta: &[f64], rng: &mut dyn RngCore) -> Box<dyn Model> {
        let y = (0..self.y.len())
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                theta[0] + self.noise_sd * e
            })
            .collect();
        Box::new(Self {
            y,
            ..self.clone()
        })
    }
}
