//! Eight-schools hierarchical normal model.
//!
//! Eight experiments reported a treatment-effect estimate `y_j` with known
//! standard error `σ_j`. The model pools them through a population mean `μ`
//! and scale `τ`:
//!
//! ```text
//! y_j | θ_j ~ N(θ_j, σ_j²),   θ_j | μ, τ ~ N(μ, τ²),
//! μ ~ N(0, 5²),               τ ~ half-Cauchy(0, 5)
//! ```
//!
//! Two parametrizations of the same posterior are provided. The centered
//! one optimizes over `θ_j` directly and exhibits the funnel dependence
//! between `θ` and `τ`; the non-centered one optimizes over
//! `θ*_j = (θ_j - μ)/τ`, trading prior independence for likelihood
//! dependence. Both expose the same constrained parameters
//! `(θ_1..θ_8, μ, τ)`, so diagnostics of the two are directly comparable.

use super::density::{dln_half_cauchy, ln_half_cauchy, ln_normal};
use super::{Model, Transform};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

/// Observed effects and their standard errors, one per school.
pub const SCHOOL_EFFECTS: [f64; 8] = [28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 8.0, 12.0];
pub const SCHOOL_SIGMAS: [f64; 8] = [15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0];

const N_SCHOOLS: usize = 8;
const MU_PRIOR_SD: f64 = 5.0;
const TAU_PRIOR_SCALE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    Centered,
    NonCentered,
}

#[derive(Debug, Clone)]
pub struct EightSchools {
    parametrization: Parametrization,
    y: [f64; 8],
    sigma: [f64; 8],
}

impl EightSchools {
    /// The model on the canonical dataset.
    pub fn new(parametrization: Parametrization) -> Self {
        Self {
            parametrization,
            y: SCHOOL_EFFECTS,
            sigma: SCHOOL_SIGMAS,
        }
    }

    pub fn parametrization(&self) -> Parametrization {
        self.parametrization
    }

    /// Unconstrained index of `tau` (the `log τ` coordinate).
    pub fn tau_coord() -> usize {
        9
    }

    /// Log target density over the constrained vector `(θ, μ, τ)`, without
    /// any Jacobian terms. Identical for both parametrizations: they are
    /// reparametrizations of the same posterior.
    pub fn log_joint_constrained(&self, theta: &[f64]) -> f64 {
        let effects = &theta[..N_SCHOOLS];
        let mu = theta[N_SCHOOLS];
        let tau = theta[N_SCHOOLS + 1];
        if tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut lp = ln_normal(mu, 0.0, MU_PRIOR_SD) + ln_half_cauchy(tau, TAU_PRIOR_SCALE);
        for j in 0..N_SCHOOLS {
            lp += ln_normal(self.y[j], effects[j], self.sigma[j]);
            lp += ln_normal(effects[j], mu, tau);
        }
        lp
    }
}

impl Model for EightSchools {
    fn dim(&self) -> usize {
        N_SCHOOLS + 2
    }

    fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=N_SCHOOLS).map(|j| format!("theta{j}")).collect();
        names.push("mu".into());
        names.push("tau".into());
        names
    }

    fn transforms(&self) -> Vec<Transform> {
        let mut t = vec![Transform::Identity; N_SCHOOLS + 1];
        t.push(Transform::Log);
        t
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        let mu = z[N_SCHOOLS];
        let log_tau = z[N_SCHOOLS + 1];
        let tau = log_tau.exp();
        let mut lp = ln_normal(mu, 0.0, MU_PRIOR_SD)
            + ln_half_cauchy(tau, TAU_PRIOR_SCALE)
            + log_tau;
        match self.parametrization {
            Parametrization::Centered => {
                for j in 0..N_SCHOOLS {
                    let theta_j = z[j];
                    lp += ln_normal(self.y[j], theta_j, self.sigma[j]);
                    lp += ln_normal(theta_j, mu, tau);
                }
            }
            Parametrization::NonCentered => {
                for j in 0..N_SCHOOLS {
                    let star = z[j];
                    lp += ln_normal(self.y[j], mu + tau * star, self.sigma[j]);
                    lp += ln_normal(star, 0.0, 1.0);
                }
            }
        }
        lp
    }

    fn grad_log_joint(&self, z: &[f64]) -> Vec<f64> {
        let mu = z[N_SCHOOLS];
        let log_tau = z[N_SCHOOLS + 1];
        let tau = log_tau.exp();
        let mut grad = vec![0.0; self.dim()];
        let mut g_mu = -mu / (MU_PRIOR_SD * MU_PRIOR_SD);
        let mut g_log_tau = tau * dln_half_cauchy(tau, TAU_PRIOR_SCALE) + 1.0;
        match self.parametrization {
            Parametrization::Centered => {
                for j in 0..N_SCHOOLS {
                    let theta_j = z[j];
                    let obs = (self.y[j] - theta_j) / (self.sigma[j] * self.sigma[j]);
                    let pool = (theta_j - mu) / (tau * tau);
                    grad[j] = obs - pool;
                    g_mu += pool;
                    g_log_tau += -1.0 + (theta_j - mu) * (theta_j - mu) / (tau * tau);
                }
            }
            Parametrization::NonCentered => {
                for j in 0..N_SCHOOLS {
                    let star = z[j];
                    let r = (self.y[j] - mu - tau * star) / (self.sigma[j] * self.sigma[j]);
                    grad[j] = r * tau - star;
                    g_mu += r;
                    g_log_tau += r * star * tau;
                }
            }
        }
        grad[N_SCHOOLS] = g_mu;
        grad[N_SCHOOLS + 1] = g_log_tau;
        grad
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mu = MU_PRIOR_SD * {
            let e: f64 = StandardNormal.sample(rng);
            e
        };
        // half-Cauchy by inverting the CDF of |Cauchy|
        let u: f64 = rng.random();
        let tau = TAU_PRIOR_SCALE * (std::f64::consts::FRAC_PI_2 * u).tan();
        let mut theta: Vec<f64> = (0..N_SCHOOLS)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                mu + tau * e
            })
            .collect();
        theta.push(mu);
        theta.push(tau);
        theta
    }

    fn simulate_data(&self, theta: &[f64], rng: &mut dyn RngCore) -> Box<dyn Model> {
        let mut m = self.clone();
        for j in 0..N_SCHOOLS {
            let e: f64 = StandardNormal.sample(rng);
            m.y[j] = theta[j] + self.sigma[j] * e;
        }
        Box::new(m)
    }

    fn constrain(&self, z: &[f64]) -> Vec<f64> {
        let mu = z[N_SCHOOLS];
        let tau = z[N_SCHOOLS + 1].exp();
        let mut theta: Vec<f64> = match self.parametrization {
            Parametrization::Centered => z[..N_SCHOOLS].to_vec(),
            Parametrization::NonCentered => {
                z[..N_SCHOOLS].iter().map(|&s| mu + tau * s).collect()
            }
        };
        theta.push(mu);
        theta.push(tau);
        theta
    }

    fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        let mu = theta[N_SCHOOLS];
        let tau = theta[N_SCHOOLS + 1];
        let mut z: Vec<f64> = match self.parametrization {
            Parametrization::Centered => theta[..N_SCHOOLS].to_vec(),
            Parametrization::NonCentered => theta[..N_SCHOOLS]
                .iter()
                .map(|&t| (t - mu) / tau)
                .collect(),
        };
        z.push(mu);
        z.push(tau.ln());
        z
    }

    fn derived_coord(&self, i: usize) -> bool {
        matches!(self.parametrization, Parametrization::NonCentered) && i < N_SCHOOLS
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{check_gradient, gradient_check_points};
    use crate::rng::child_rng;
    use approx::assert_relative_eq;

    #[test]
    fn gradients_match_finite_differences() {
        for p in [Parametrization::Centered, Parametrization::NonCentered] {
            let m = EightSchools::new(p);
            let pts = gradient_check_points(m.dim(), 20, 8);
            let err = check_gradient(&m, &pts);
            assert!(err < 1e-5, "{p:?} gradient check failed: {err}");
        }
    }

    #[test]
    fn jacobian_consistency_between_scales() {
        // unconstrained log-joint = constrained log-density + log tau
        for p in [Parametrization::Centered, Parametrization::NonCentered] {
            let m = EightSchools::new(p);
            let mut rng = child_rng(41, 0);
            for _ in 0..50 {
                let theta0 = m.sample_prior(&mut rng);
                let z = m.unconstrain(&theta0);
                let constrained = m.constrain(&z);
                // non-centered constrain is the full (θ, μ, τ) vector; pass it
                // through the shared constrained-scale density
                let lhs = m.log_joint(&z);
                let log_jac: f64 = match p {
                    // θ* -> θ contributes τ per school; log τ itself contributes τ
                    Parametrization::Centered => z[9],
                    Parametrization::NonCentered => 9.0 * z[9],
                };
                let rhs = m.log_joint_constrained(&constrained) + log_jac;
                assert!(
                    (lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0),
                    "{p:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn round_trip_transforms() {
        for p in [Parametrization::Centered, Parametrization::NonCentered] {
            let m = EightSchools::new(p);
            let mut rng = child_rng(42, 0);
            for _ in 0..20 {
                let theta = m.sample_prior(&mut rng);
                let back = m.constrain(&m.unconstrain(&theta));
                for (a, b) in theta.iter().zip(&back) {
                    assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn tau_jacobian_by_quadrature() {
        // slice over τ with the other coordinates fixed: integrating the
        // unconstrained representation over log τ equals integrating the
        // constrained density over τ
        let m = EightSchools::new(Parametrization::Centered);
        let point = [10.0, 5.0, 0.0, 7.0, -1.0, 2.0, 8.0, 11.0, 6.0, 0.0];
        let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize| {
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * f(lo + i as f64 * h);
            }
            acc * h / 3.0
        };
        let unc = simpson(
            &|lt| {
                let mut z = point;
                z[9] = lt;
                m.log_joint(&z).exp()
            },
            -12.0,
            8.0,
            400_000,
        );
        let con = simpson(
            &|tau| {
                let mut c = point;
                c[9] = tau;
                m.log_joint_constrained(&c).exp()
            },
            1e-8,
            8f64.exp(),
            400_000,
        );
        assert!(
            (unc - con).abs() < 1e-5 * unc.max(1e-300),
            "{unc} vs {con}"
        );
    }

    #[test]
    fn parametrizations_share_constrained_names() {
        let c = EightSchools::new(Parametrization::Centered);
        let nc = EightSchools::new(Parametrization::NonCentered);
        assert_eq!(c.param_names(), nc.param_names());
    }

    #[test]
    fn prior_draws_give_finite_log_joint() {
        for p in [Parametrization::Centered, Parametrization::NonCentered] {
            let m = EightSchools::new(p);
            let mut rng = child_rng(43, 0);
            for _ in 0..100 {
                let theta = m.sample_prior(&mut rng);
                let dm = m.simulate_data(&theta, &mut rng);
                let z = dm.unconstrain(&theta);
                assert!(dm.log_joint(&z).is_finite());
            }
        }
    }
}
