//! Model zoo with a uniform contract.
//!
//! Every model exposes its unnormalized log-joint **on the unconstrained
//! scale, Jacobian terms included**, together with an analytic gradient, a
//! prior sampler and a data simulator. That contract is everything the VI
//! engine, the Metropolis oracle and the VSBC loop need.
//!
//! Positive parameters are unconstrained through `log`; see [`Transform`].
//! Gradients are hand-derived per model and checked against central finite
//! differences (see [`check_gradient`]), which every model must pass.

mod analytic;
mod horseshoe;
mod linear;
mod logistic;
mod schools;

pub use analytic::{AnalyticGaussian, ConjugateNormal, CorrelatedGaussian2d};
pub use horseshoe::RegularizedHorseshoe;
pub use linear::LinearRegression;
pub use logistic::LogisticRegression;
pub use schools::{EightSchools, Parametrization};

use rand::RngCore;

/// Per-coordinate bijection between the constrained and unconstrained scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Coordinate is already unconstrained.
    Identity,
    /// Positive coordinate mapped through `z = ln(x)`; `log|dx/dz| = z`.
    Log,
}

impl Transform {
    /// Unconstrained -> constrained.
    pub fn constrain(&self, z: f64) -> f64 {
        match self {
            Transform::Identity => z,
            Transform::Log => z.exp(),
        }
    }

    /// Constrained -> unconstrained.
    pub fn unconstrain(&self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
        }
    }

    /// `log |d constrained / d unconstrained|` at `z`.
    pub fn log_jacobian(&self, z: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Log => z,
        }
    }
}

/// Uniform model contract.
///
/// `log_joint` and `grad_log_joint` act on length-`dim` unconstrained
/// vectors. `sample_prior`, `simulate_data` and `constrain`/`unconstrain`
/// act on the constrained scale.
pub trait Model: Send + Sync {
    /// Unconstrained dimension `K`.
    fn dim(&self) -> usize;

    /// Constrained-scale parameter labels, length `K`.
    fn param_names(&self) -> Vec<String>;

    /// Per-coordinate transforms (unconstrained coordinate `i` of the
    /// parameter vector).
    fn transforms(&self) -> Vec<Transform>;

    /// Unnormalized log `p(θ(z), y)` plus the log-Jacobian of the transform.
    fn log_joint(&self, z: &[f64]) -> f64;

    /// Analytic gradient of [`Model::log_joint`].
    fn grad_log_joint(&self, z: &[f64]) -> Vec<f64>;

    /// Draw a constrained parameter vector from the prior.
    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Same model with a fresh dataset simulated from `theta` (constrained).
    fn simulate_data(&self, theta: &[f64], rng: &mut dyn RngCore) -> Box<dyn Model>;

    /// Unconstrained -> constrained parameter vector.
    fn constrain(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.transforms())
            .map(|(&zi, t)| t.constrain(zi))
            .collect()
    }

    /// Constrained -> unconstrained parameter vector.
    fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.transforms())
            .map(|(&xi, t)| t.unconstrain(xi))
            .collect()
    }

    /// Whether constrained coordinate `i` depends on other coordinates
    /// (e.g. a non-centered parametrization rebuilding the centered value).
    /// Such coordinates need Monte Carlo calibration probabilities instead
    /// of the closed-form normal CDF.
    fn derived_coord(&self, _i: usize) -> bool {
        false
    }

    /// Analytic marginal log-density of unconstrained coordinate `i`, when
    /// the model knows it (analytic targets only).
    fn marginal_log_density(&self, _i: usize, _value: f64) -> Option<f64> {
        None
    }
}

/// Worst relative disagreement between the analytic gradient and central
/// finite differences of the log-joint over the given points.
///
/// The denominator is floored at 1 so near-zero gradient coordinates are
/// compared absolutely.
pub fn check_gradient(model: &dyn Model, points: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for z in points {
        let grad = model.grad_log_joint(z);
        let mut zp = z.clone();
        for i in 0..model.dim() {
            let h = 1e-5 * z[i].abs().max(1.0);
            zp[i] = z[i] + h;
            let up = model.log_joint(&zp);
            zp[i] = z[i] - h;
            let down = model.log_joint(&zp);
            zp[i] = z[i];
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1.0);
            worst = worst.max((fd - grad[i]).abs() / denom);
        }
    }
    worst
}

/// Standard set of random unconstrained test points for gradient checks.
pub fn gradient_check_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = crate::rng::rng_from_seed(seed);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.5 * z
                })
                .collect()
        })
        .collect()
}

pub(crate) mod density {
    //! Shared log-density kernels.

    pub const LN_2PI: f64 = 1.8378770664093453;

    pub fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
        let z = (x - mean) / sd;
        -sd.ln() - 0.5 * LN_2PI - 0.5 * z * z
    }

    /// Half-Cauchy(0, scale) on x > 0.
    pub fn ln_half_cauchy(x: f64, scale: f64) -> f64 {
        let r = x / scale;
        (2.0 / (std::f64::consts::PI * scale)).ln() - (r * r).ln_1p()
    }

    /// d/dx of [`ln_half_cauchy`].
    pub fn dln_half_cauchy(x: f64, scale: f64) -> f64 {
        let r = x / scale;
        -2.0 * r / (scale * (1.0 + r * r))
    }

    /// Gamma(shape, rate) on x > 0.
    pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
        shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln()
            - rate * x
    }

    /// Inverse-Gamma(shape, scale) on x > 0.
    pub fn ln_inv_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
        shape * scale.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln()
            - scale / x
    }

    /// ln(1 + e^x) without overflow.
    pub fn ln1p_exp(x: f64) -> f64 {
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    }

    pub fn sigmoid(x: f64) -> f64 {
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        }
    }

    /// Standard normal CDF.
    pub fn normal_cdf(x: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
    }
}
