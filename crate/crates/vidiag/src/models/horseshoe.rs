//! Sparse logistic regression with a regularized horseshoe prior.
//!
//! ```text
//! y | β ~ Bernoulli(logit⁻¹(β₀ + Xβ)),   β_j = z_j · τ · λ̃_j,
//! λ̃_j² = c² λ_j² / (c² + τ² λ_j²),
//! z_j ~ N(0,1),  λ_j ~ C⁺(0,1),  τ ~ C⁺(0, τ₀),  β₀ ~ N(0,10),
//! c² = slab_scale² · c_aux,  c_aux ~ Inv-Gamma(slab_df/2, slab_df/2)
//! ```
//!
//! With `slab_scale = 2` and `slab_df = 4` the slab width satisfies
//! `c² ~ Inv-Gamma(2, 8)`. The default global-shrinkage scale follows the
//! `τ₀ = 2 / (√n (D-1))` rule. All positive parameters are unconstrained
//! through `log`.
//!
//! This is the `D ≫ n` regime that defeats mean-field approximations: the
//! posterior of individual coefficients is a spike-and-slab-like mixture a
//! Gaussian cannot represent.

use super::density::{dln_half_cauchy, ln_half_cauchy, ln_inv_gamma_pdf, ln_normal, ln1p_exp, sigmoid};
use super::{Model, Transform};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};

const SLAB_SCALE: f64 = 2.0;
const SLAB_DF: f64 = 4.0;
const INTERCEPT_SD: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct RegularizedHorseshoe {
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    n_coef: usize,
    tau0: f64,
}

impl RegularizedHorseshoe {
    pub fn from_design(x: Vec<Vec<f64>>, y: Vec<u8>, tau0: Option<f64>) -> crate::Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(crate::Error::LengthMismatch(format!(
                "design rows ({}) and responses ({})",
                x.len(),
                y.len()
            )));
        }
        let n_coef = x[0].len();
        if n_coef < 2 || x.iter().any(|row| row.len() != n_coef) {
            return Err(crate::Error::InvalidParameter(
                "horseshoe design needs at least two equal-length columns".into(),
            ));
        }
        let n = x.len() as f64;
        let tau0 = tau0.unwrap_or(2.0 / (n.sqrt() * (n_coef as f64 - 1.0)));
        if !(tau0 > 0.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "tau0 must be positive, got {tau0}"
            )));
        }
        Ok(Self { x, y, n_coef, tau0 })
    }

    /// Synthetic sparse problem: i.i.d. N(0,1) design, responses generated
    /// from a truth with `n_signal` coefficients equal to ±3 and the rest 0.
    pub fn synthetic(n: usize, n_coef: usize, n_signal: usize, rng: &mut dyn RngCore) -> crate::Result<Self> {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n_coef).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let beta: Vec<f64> = (0..n_coef)
            .map(|j| {
                if j < n_signal {
                    if j % 2 == 0 { 3.0 } else { -3.0 }
                } else {
                    0.0
                }
            })
            .collect();
        let y: Vec<u8> = x
            .iter()
            .map(|row| {
                let eta: f64 = row.iter().zip(&beta).map(|(xij, b)| xij * b).sum();
                u8::from(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        Self::from_design(x, y, None)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_coef(&self) -> usize {
        self.n_coef
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// Unconstrained index of `log τ`.
    pub fn tau_coord(&self) -> usize {
        2 * self.n_coef + 1
    }

    /// Unconstrained index of `log λ_j` (1-based `j`).
    pub fn lambda_coord(&self, j: usize) -> usize {
        self.n_coef + j
    }

    /// Regression coefficients implied by a constrained parameter vector.
    pub fn coefficients(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.n_coef;
        let tau = theta[2 * d + 1];
        let c2 = SLAB_SCALE * SLAB_SCALE * theta[2 * d + 2];
        (0..d)
            .map(|j| {
                let z = theta[1 + j];
                let lambda = theta[1 + d + j];
                let w = tau * tau * lambda * lambda;
                z * tau * lambda * (c2 / (c2 + w)).sqrt()
            })
            .collect()
    }
}

impl Model for RegularizedHorseshoe {
    fn dim(&self) -> usize {
        2 * self.n_coef + 3
    }

    fn param_names(&self) -> Vec<String> {
        let d = self.n_coef;
        let mut names = Vec::with_capacity(2 * d + 3);
        names.push("beta0".into());
        names.extend((1..=d).map(|j| format!("z{j}")));
        names.extend((1..=d).map(|j| format!("lambda{j}")));
        names.push("tau".into());
        names.push("c_aux".into());
        names
    }

    fn transforms(&self) -> Vec<Transform> {
        let d = self.n_coef;
        let mut t = vec![Transform::Identity; 1 + d];
        t.extend(vec![Transform::Log; d + 2]);
        t
    }

    fn log_joint(&self, zv: &[f64]) -> f64 {
        let d = self.n_coef;
        let beta0 = zv[0];
        let z = &zv[1..=d];
        let log_lambda = &zv[1 + d..=2 * d];
        let log_tau = zv[2 * d + 1];
        let log_caux = zv[2 * d + 2];
        let tau = log_tau.exp();
        let caux = log_caux.exp();
        let c2 = SLAB_SCALE * SLAB_SCALE * caux;

        // shrunk coefficients
        let mut beta = vec![0.0; d];
        for j in 0..d {
            let lambda = log_lambda[j].exp();
            let w = tau * tau * lambda * lambda;
            beta[j] = z[j] * tau * lambda * (c2 / (c2 + w)).sqrt();
        }

        let mut lp = 0.0;
        for (row, &yi) in self.x.iter().zip(&self.y) {
            let eta: f64 = beta0 + row.iter().zip(&beta).map(|(xij, b)| xij * b).sum::<f64>();
            lp += f64::from(yi) * eta - ln1p_exp(eta);
        }

        lp += ln_normal(beta0, 0.0, INTERCEPT_SD);
        for &zj in z {
            lp += ln_normal(zj, 0.0, 1.0);
        }
        for &ll in log_lambda {
            lp += ln_half_cauchy(ll.exp(), 1.0) + ll;
        }
        lp += ln_half_cauchy(tau, self.tau0) + log_tau;
        lp += ln_inv_gamma_pdf(caux, 0.5 * SLAB_DF, 0.5 * SLAB_DF) + log_caux;
        lp
    }

    fn grad_log_joint(&self, zv: &[f64]) -> Vec<f64> {
        let d = self.n_coef;
        let beta0 = zv[0];
        let z = &zv[1..=d];
        let log_lambda = &zv[1 + d..=2 * d];
        let log_tau = zv[2 * d + 1];
        let log_caux = zv[2 * d + 2];
        let tau = log_tau.exp();
        let caux = log_caux.exp();
        let c2 = SLAB_SCALE * SLAB_SCALE * caux;

        // m_j = τ λ_j sqrt(c²/(c²+w_j)) so that β_j = z_j m_j; the chain
        // factors below are ∂m/∂(log λ_j) = ∂m/∂(log τ) = m c²/(c²+w) and
        // ∂m/∂(log c_aux) = m w/(2(c²+w)).
        let mut m = vec![0.0; d];
        let mut shrink = vec![0.0; d];
        let mut slab = vec![0.0; d];
        for j in 0..d {
            let lambda = log_lambda[j].exp();
            let w = tau * tau * lambda * lambda;
            m[j] = tau * lambda * (c2 / (c2 + w)).sqrt();
            shrink[j] = c2 / (c2 + w);
            slab[j] = 0.5 * w / (c2 + w);
        }

        // likelihood residuals and their design projections
        let mut g0 = 0.0;
        let mut gproj = vec![0.0; d];
        for (row, &yi) in self.x.iter().zip(&self.y) {
            let eta: f64 = beta0
                + row
                    .iter()
                    .zip(z.iter().zip(&m))
                    .map(|(xij, (zj, mj))| xij * zj * mj)
                    .sum::<f64>();
            let r = f64::from(yi) - sigmoid(eta);
            g0 += r;
            for (gp, xij) in gproj.iter_mut().zip(row) {
                *gp += r * xij;
            }
        }

        let mut grad = vec![0.0; self.dim()];
        grad[0] = g0 - beta0 / (INTERCEPT_SD * INTERCEPT_SD);
        let mut g_log_tau = tau * dln_half_cauchy(tau, self.tau0) + 1.0;
        let mut g_log_caux = -(0.5 * SLAB_DF + 1.0) + 0.5 * SLAB_DF / caux + 1.0;
        for j in 0..d {
            let pull = gproj[j] * z[j] * m[j];
            grad[1 + j] = gproj[j] * m[j] - z[j];
            let lambda = log_lambda[j].exp();
            grad[1 + d + j] = pull * shrink[j] + lambda * dln_half_cauchy(lambda, 1.0) + 1.0;
            g_log_tau += pull * shrink[j];
            g_log_caux += pull * slab[j];
        }
        grad[2 * d + 1] = g_log_tau;
        grad[2 * d + 2] = g_log_caux;
        grad
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.n_coef;
        let mut theta = Vec::with_capacity(2 * d + 3);
        let e: f64 = StandardNormal.sample(rng);
        theta.push(INTERCEPT_SD * e);
        for _ in 0..d {
            let e: f64 = StandardNormal.sample(rng);
            theta.push(e);
        }
        for _ in 0..d {
            let u: f64 = rng.random();
            theta.push((std::f64::consts::FRAC_PI_2 * u).tan());
        }
        let u: f64 = rng.random();
        theta.push(self.tau0 * (std::f64::consts::FRAC_PI_2 * u).tan());
        // c_aux ~ Inv-Gamma(a, b) as 1 / Gamma(a, rate b)
        let gamma = Gamma::new(0.5 * SLAB_DF, 1.0 / (0.5 * SLAB_DF)).expect("valid gamma");
        theta.push(1.0 / gamma.sample(rng));
        theta
    }

    fn simulate_data(&self, theta: &[f64], rng: &mut dyn RngCore) -> Box<dyn Model> {
        let beta = self.coefficients(theta);
        let beta0 = theta[0];
        let mut m = self.clone();
        for (i, row) in self.x.iter().enumerate() {
            let eta: f64 = beta0 + row.iter().zip(&beta).map(|(xij, b)| xij * b).sum::<f64>();
            m.y[i] = u8::from(rng.random::<f64>() < sigmoid(eta));
        }
        Box::new(m)
    }
}
