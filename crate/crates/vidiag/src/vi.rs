//! Mean-field Gaussian variational inference on the unconstrained scale.
//!
//! The family is a fully factorized Gaussian parameterized by per-coordinate
//! means `mu` and log standard deviations `omega`. The ELBO
//! `E_q[log p(θ,y)] + H(q)` is maximized by stochastic gradient ascent with
//! reparameterization gradients (`θ = mu + exp(omega) ⊙ z`): models supply
//! analytic `∇ log p`, the entropy term is closed-form (so its gradient with
//! respect to each `omega_i` is exactly 1), and per-coordinate steps are
//! scaled by an accumulated-squared-gradient denominator.
//!
//! Convergence follows the relative-ELBO-change rule: every `eval_every`
//! iterations the ELBO is estimated, and the running mean *and* running
//! median of the last 10 relative changes are checked against
//! `tol_rel_obj`; either one dropping below stops the fit. Loose tolerances
//! stop early and can freeze the approximation far from the optimum, which
//! is precisely the failure mode the k-hat diagnostic catches.

use crate::error::{Error, Result};
use crate::models::Model;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.8378770664093453;

/// Fully factorized Gaussian on the unconstrained scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldGaussian {
    /// Per-coordinate means.
    pub mu: Vec<f64>,
    /// Per-coordinate log standard deviations.
    pub omega: Vec<f64>,
}

impl MeanFieldGaussian {
    pub fn new(mu: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if mu.len() != omega.len() {
            return Err(Error::LengthMismatch(format!(
                "mu ({}) and omega ({})",
                mu.len(),
                omega.len()
            )));
        }
        if let Some(i) = mu.iter().chain(omega.iter()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "mean-field parameters",
                index: i,
            });
        }
        Ok(Self { mu, omega })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            omega: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn stddevs(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w.exp()).collect()
    }

    /// Exact differential entropy `Σ omega_i + K/2 (1 + ln 2π)`.
    pub fn entropy(&self) -> f64 {
        self.omega.iter().sum::<f64>() + 0.5 * self.dim() as f64 * (1.0 + LN_2PI)
    }

    /// Exact log-density at `z`.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let mut lp = 0.0;
        for ((&zi, &m), &w) in z.iter().zip(&self.mu).zip(&self.omega) {
            let u = (zi - m) / w.exp();
            lp += -w - 0.5 * LN_2PI - 0.5 * u * u;
        }
        lp
    }

    /// Marginal CDF of coordinate `i` at `x` (both unconstrained).
    pub fn coordinate_cdf(&self, i: usize, x: f64) -> f64 {
        let u = (x - self.mu[i]) / self.omega[i].exp();
        crate::models::density::normal_cdf(u)
    }

    /// One draw `mu + exp(omega) ⊙ z`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mu
            .iter()
            .zip(&self.omega)
            .map(|(&m, &w)| {
                let z: f64 = StandardNormal.sample(rng);
                m + w.exp() * z
            })
            .collect()
    }
}

/// Stochastic-optimization settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViConfig {
    /// Threshold on the running mean/median of relative ELBO changes.
    pub tol_rel_obj: f64,
    /// Base step size multiplied by the adaptive per-coordinate scaling.
    pub eta: f64,
    /// Monte Carlo draws per gradient estimate.
    pub n_mc_grad: usize,
    /// Monte Carlo draws per ELBO evaluation.
    pub n_mc_elbo: usize,
    /// Hard iteration cap.
    pub max_iters: usize,
    /// Iterations between ELBO evaluations.
    pub eval_every: usize,
    /// RNG seed; fits are deterministic given (seed, config).
    pub seed: u64,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            tol_rel_obj: 1e-4,
            eta: 0.1,
            n_mc_grad: 8,
            n_mc_elbo: 100,
            max_iters: 20_000,
            eval_every: 50,
            seed: 0,
        }
    }
}

impl ViConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel_obj > 0.0 && self.tol_rel_obj < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tol_rel_obj must be in (0, 1), got {}",
                self.tol_rel_obj
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.n_mc_grad == 0 || self.n_mc_elbo == 0 || self.max_iters == 0 || self.eval_every == 0
        {
            return Err(Error::InvalidParameter(
                "n_mc_grad, n_mc_elbo, max_iters and eval_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// ELBO evaluations recorded during a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitTrace {
    /// ELBO estimate at each evaluation.
    pub elbo: Vec<f64>,
    /// Iteration index of each evaluation.
    pub eval_iters: Vec<usize>,
    /// Iterations actually run.
    pub iterations: usize,
    /// Whether the relative-change rule fired before `max_iters`.
    pub converged: bool,
}

/// Stabilizer added to the accumulated-squared-gradient denominator.
const ADAPT_STABILIZER: f64 = 1e-8;
/// Stopping rule window, in ELBO evaluations.
const STOP_WINDOW: usize = 10;
/// Retry budget multiplier for non-finite log-joint draws.
const RETRY_FACTOR: usize = 10;

/// Monte Carlo ELBO estimate with the entropy term exact.
///
/// Draws with a non-finite log-joint are rejected and redrawn, up to
/// `10 * n_mc` attempts.
pub fn elbo_estimate(
    q: &MeanFieldGaussian,
    model: &dyn Model,
    n_mc: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let budget = RETRY_FACTOR * n_mc;
    while accepted < n_mc {
        if attempts >= budget {
            return Err(Error::NonFiniteLogJoint { attempts });
        }
        attempts += 1;
        let theta = q.draw(rng);
        let lp = model.log_joint(&theta);
        if lp.is_finite() {
            sum += lp;
            accepted += 1;
        }
    }
    Ok(sum / n_mc as f64 + q.entropy())
}

/// Reparameterization gradient of the ELBO at `q`.
///
/// Returns `(grad_mu, grad_omega)`. The entropy contribution to each
/// `omega_i` is exactly 1; the expectation term is estimated from `n_mc`
/// draws using the model's analytic gradient.
pub(crate) fn elbo_gradient(
    q: &MeanFieldGaussian,
    model: &dyn Model,
    n_mc: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = q.dim();
    let sds = q.stddevs();
    let mut g_mu = vec![0.0; k];
    let mut g_omega = vec![0.0; k];
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let budget = RETRY_FACTOR * n_mc;
    let mut z = vec![0.0; k];
    let mut theta = vec![0.0; k];
    while accepted < n_mc {
        if attempts >= budget {
            return Err(Error::NonFiniteLogJoint { attempts });
        }
        attempts += 1;
        for i in 0..k {
            let e: f64 = StandardNormal.sample(rng);
            z[i] = e;
            theta[i] = q.mu[i] + sds[i] * e;
        }
        let grad = model.grad_log_joint(&theta);
        if grad.iter().any(|g| !g.is_finite()) {
            continue;
        }
        for i in 0..k {
            g_mu[i] += grad[i];
            g_omega[i] += grad[i] * z[i] * sds[i];
        }
        accepted += 1;
    }
    let nf = n_mc as f64;
    for i in 0..k {
        g_mu[i] /= nf;
        g_omega[i] = g_omega[i] / nf + 1.0;
    }
    Ok((g_mu, g_omega))
}

/// Fit a mean-field Gaussian to the model by stochastic gradient ascent.
///
/// Initialization is `mu = 0`, `omega = 0` on the unconstrained scale.
/// Returns the fitted approximation and the ELBO trace; a non-finite ELBO
/// evaluation aborts with [`Error::OptimizerDiverged`] carrying the trace.
pub fn advi_fit(model: &dyn Model, cfg: &ViConfig) -> Result<(MeanFieldGaussian, FitTrace)> {
    cfg.validate()?;
    let k = model.dim();
    let mut rng = crate::rng::rng_from_seed(cfg.seed);
    let mut q = MeanFieldGaussian::standard(k);
    let mut acc_mu = vec![0.0; k];
    let mut acc_omega = vec![0.0; k];

    let mut trace = FitTrace {
        elbo: Vec::new(),
        eval_iters: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut rel_changes: std::collections::VecDeque<f64> =
        std::collections::VecDeque::with_capacity(STOP_WINDOW);

    for iter in 1..=cfg.max_iters {
        trace.iterations = iter;
        let (g_mu, g_omega) = elbo_gradient(&q, model, cfg.n_mc_grad, &mut rng)?;
        for i in 0..k {
            acc_mu[i] += g_mu[i] * g_mu[i];
            acc_omega[i] += g_omega[i] * g_omega[i];
            q.mu[i] += cfg.eta * g_mu[i] / (acc_mu[i].sqrt() + ADAPT_STABILIZER);
            q.omega[i] += cfg.eta * g_omega[i] / (acc_omega[i].sqrt() + ADAPT_STABILIZER);
        }
        if q.mu.iter().chain(q.omega.iter()).any(|v| !v.is_finite()) {
            return Err(Error::OptimizerDiverged {
                iter,
                trace: trace.elbo,
            });
        }

        if iter % cfg.eval_every == 0 {
            let elbo = elbo_estimate(&q, model, cfg.n_mc_elbo, &mut rng)?;
            if !elbo.is_finite() {
                return Err(Error::OptimizerDiverged {
                    iter,
                    trace: trace.elbo,
                });
            }
            if let Some(&prev) = trace.elbo.last() {
                let rel = (elbo - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
                if rel_changes.len() == STOP_WINDOW {
                    rel_changes.pop_front();
                }
                rel_changes.push_back(rel);
            }
            trace.elbo.push(elbo);
            trace.eval_iters.push(iter);

            if rel_changes.len() == STOP_WINDOW {
                let mean = rel_changes.iter().sum::<f64>() / STOP_WINDOW as f64;
                let mut sorted: Vec<f64> = rel_changes.iter().copied().collect();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                let median = 0.5 * (sorted[STOP_WINDOW / 2 - 1] + sorted[STOP_WINDOW / 2]);
                if mean < cfg.tol_rel_obj || median < cfg.tol_rel_obj {
                    trace.converged = true;
                    break;
                }
            }
        }
    }
    Ok((q, trace))
}

/// Draw `s` samples from `q` with their exact log-densities.
pub fn sample_q(
    q: &MeanFieldGaussian,
    s: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut draws = Vec::with_capacity(s);
    let mut log_q = Vec::with_capacity(s);
    for _ in 0..s {
        let theta = q.draw(rng);
        log_q.push(q.log_density(&theta));
        draws.push(theta);
    }
    (draws, log_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AnalyticGaussian, ConjugateNormal, CorrelatedGaussian2d};
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn entropy_matches_analytic_normal_entropy() {
        let q = MeanFieldGaussian::new(vec![1.0, -2.0], vec![0.5, -0.3]).unwrap();
        let expect: f64 = [0.5f64, -0.3]
            .iter()
            .map(|&w| 0.5 * (1.0 + LN_2PI) + w)
            .sum();
        assert_relative_eq!(q.entropy(), expect, epsilon = 1e-12);
    }

    #[test]
    fn log_density_is_factorized_normal() {
        let q = MeanFieldGaussian::new(vec![0.5, 0.0], vec![0.0, 0.7]).unwrap();
        let z = [1.0, -0.4];
        let expect = crate::models::density::ln_normal(1.0, 0.5, 1.0)
            + crate::models::density::ln_normal(-0.4, 0.0, 0.7f64.exp());
        assert_relative_eq!(q.log_density(&z), expect, epsilon = 1e-12);
    }

    #[test]
    fn elbo_zero_for_exact_match() {
        // q == p: ELBO = -KL = 0
        let model = AnalyticGaussian::standard(3);
        let q = MeanFieldGaussian::standard(3);
        let mut rng = rng_from_seed(1);
        let elbo = elbo_estimate(&q, &model, 20_000, &mut rng).unwrap();
        assert!(elbo.abs() < 0.05, "elbo {elbo}");
    }

    #[test]
    fn elbo_collapses_with_vanishing_scale() {
        // entropy penalty dominates as the approximation narrows
        let model = AnalyticGaussian::standard(1);
        let mut rng = rng_from_seed(2);
        let at_omega = |w: f64, rng: &mut ChaCha8Rng| {
            let q = MeanFieldGaussian::new(vec![0.0], vec![w]).unwrap();
            elbo_estimate(&q, &model, 5_000, rng).unwrap()
        };
        let wide = at_omega(0.0, &mut rng);
        let narrow = at_omega(-5.0, &mut rng);
        let narrower = at_omega(-10.0, &mut rng);
        assert!(wide > narrow && narrow > narrower);
        assert!(narrower < -8.0);
    }

    #[test]
    fn elbo_at_exact_posterior_is_log_evidence() {
        let model = ConjugateNormal::new(0.3, 1.2, 0.9, vec![0.5, -0.1, 0.8, 0.2]).unwrap();
        let (post_mean, post_sd) = model.posterior();
        let q = MeanFieldGaussian::new(vec![post_mean], vec![post_sd.ln()]).unwrap();
        let mut rng = rng_from_seed(3);
        let elbo = elbo_estimate(&q, &model, 50_000, &mut rng).unwrap();
        // KL(q ‖ posterior) = 0, so the ELBO equals the evidence
        assert!(
            (elbo - model.log_evidence()).abs() < 0.01,
            "elbo {elbo} vs evidence {}",
            model.log_evidence()
        );
    }

    #[test]
    fn reparam_gradient_matches_analytic_quadratic() {
        // target N(m, s²) product: grad_mu = (m - mu)/s², grad_omega = 1 - σq²/s²
        let model = AnalyticGaussian::new(vec![1.0, -0.5], vec![2.0, 0.8]).unwrap();
        let q = MeanFieldGaussian::new(vec![0.3, 0.1], vec![0.2, -0.4]).unwrap();
        let n_mc = 10_000;
        let mut rng = rng_from_seed(4);
        let (g_mu, g_omega) = elbo_gradient(&q, &model, n_mc, &mut rng).unwrap();
        let sds = q.stddevs();
        for i in 0..2 {
            let s2 = model.sd()[i] * model.sd()[i];
            let exact_mu = (model.mean()[i] - q.mu[i]) / s2;
            let exact_omega = 1.0 - sds[i] * sds[i] / s2;
            // estimator variances for a quadratic target are known in closed form
            let se_mu = (sds[i] * sds[i] / (s2 * s2) / n_mc as f64).sqrt();
            let var_omega = (sds[i] * sds[i] / s2).powi(2)
                * (2.0 + (q.mu[i] - model.mean()[i]).powi(2) / (sds[i] * sds[i]));
            let se_omega = (var_omega / n_mc as f64).sqrt();
            assert!(
                (g_mu[i] - exact_mu).abs() < 3.0 * se_mu,
                "mu[{i}]: {} vs {exact_mu} (se {se_mu})",
                g_mu[i]
            );
            assert!(
                (g_omega[i] - exact_omega).abs() < 3.0 * se_omega,
                "omega[{i}]: {} vs {exact_omega} (se {se_omega})",
                g_omega[i]
            );
        }
    }

    #[test]
    fn reparam_gradient_matches_common_random_finite_differences() {
        // same standard-normal draws on both sides of the difference
        let model = AnalyticGaussian::new(vec![0.7], vec![1.3]).unwrap();
        let q = MeanFieldGaussian::new(vec![0.2], vec![-0.1]).unwrap();
        let n_mc = 10_000;
        let zs: Vec<f64> = {
            let mut rng = rng_from_seed(5);
            (0..n_mc)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    e
                })
                .collect()
        };
        let elbo_with = |mu: f64, omega: f64| -> f64 {
            let qq = MeanFieldGaussian::new(vec![mu], vec![omega]).unwrap();
            let s = omega.exp();
            let mean_lp: f64 = zs
                .iter()
                .map(|&z| model.log_joint(&[mu + s * z]))
                .sum::<f64>()
                / n_mc as f64;
            mean_lp + qq.entropy()
        };
        let (g_mu, g_omega) = {
            // identical draws: the estimator consumes exactly one standard
            // normal per draw in one dimension
            let mut rng = rng_from_seed(5);
            elbo_gradient(&q, &model, n_mc, &mut rng).unwrap()
        };
        let h = 1e-5;
        let fd_mu =
            (elbo_with(q.mu[0] + h, q.omega[0]) - elbo_with(q.mu[0] - h, q.omega[0])) / (2.0 * h);
        let fd_omega =
            (elbo_with(q.mu[0], q.omega[0] + h) - elbo_with(q.mu[0], q.omega[0] - h)) / (2.0 * h);
        assert_relative_eq!(g_mu[0], fd_mu, max_relative = 1e-3);
        assert_relative_eq!(g_omega[0], fd_omega, max_relative = 1e-3);
    }

    #[test]
    fn gradient_vanishes_at_exact_optimum() {
        let model = AnalyticGaussian::new(vec![0.4, -1.2], vec![1.5, 0.6]).unwrap();
        let q = MeanFieldGaussian::new(
            model.mean().to_vec(),
            model.sd().iter().map(|s| s.ln()).collect(),
        )
        .unwrap();
        let n_mc = 10_000;
        let mut rng = rng_from_seed(6);
        let (g_mu, g_omega) = elbo_gradient(&q, &model, n_mc, &mut rng).unwrap();
        for i in 0..2 {
            let se_mu = (1.0 / (model.sd()[i] * model.sd()[i]) / n_mc as f64).sqrt();
            let se_omega = (2.0 / n_mc as f64).sqrt();
            assert!(g_mu[i].abs() < 3.0 * se_mu, "mu[{i}] grad {}", g_mu[i]);
            assert!(
                g_omega[i].abs() < 3.0 * se_omega,
                "omega[{i}] grad {}",
                g_omega[i]
            );
        }
    }

    #[test]
    fn fit_recovers_product_normal() {
        let model = AnalyticGaussian::new(vec![1.5, -0.7, 0.2], vec![0.5, 2.0, 1.0]).unwrap();
        let cfg = ViConfig {
            tol_rel_obj: 1e-4,
            eta: 0.1,
            seed: 7,
            ..Default::default()
        };
        let (q, trace) = advi_fit(&model, &cfg).unwrap();
        assert!(trace.converged, "did not converge in {}", trace.iterations);
        for i in 0..3 {
            assert!(
                (q.mu[i] - model.mean()[i]).abs() < 0.05,
                "mu[{i}] {} vs {}",
                q.mu[i],
                model.mean()[i]
            );
            let sd = q.omega[i].exp();
            assert!(
                (sd / model.sd()[i] - 1.0).abs() < 0.10,
                "sd[{i}] {} vs {}",
                sd,
                model.sd()[i]
            );
        }
    }

    #[test]
    fn mean_field_underestimates_correlated_scales() {
        // KL(q‖p) for Gaussian targets matches precisions: the fitted scale is
        // the conditional sd sqrt(1-ρ²), below the marginal sd 1
        let model = CorrelatedGaussian2d::new(0.9).unwrap();
        let cfg = ViConfig {
            tol_rel_obj: 1e-4,
            eta: 0.1,
            seed: 8,
            ..Default::default()
        };
        let (q, _) = advi_fit(&model, &cfg).unwrap();
        for i in 0..2 {
            let sd = q.omega[i].exp();
            assert!(sd < 1.0, "sd[{i}] = {sd} not under-dispersed");
            assert!(
                (sd - model.conditional_sd()).abs() < 0.1,
                "sd[{i}] = {sd} vs conditional {}",
                model.conditional_sd()
            );
        }
    }

    #[test]
    fn looser_tolerance_stops_no_later() {
        let model = AnalyticGaussian::new(vec![2.0; 4], vec![0.3, 1.0, 3.0, 0.5]).unwrap();
        let loose = ViConfig {
            tol_rel_obj: 1e-2,
            seed: 9,
            ..Default::default()
        };
        let tight = ViConfig {
            tol_rel_obj: 1e-6,
            seed: 9,
            ..Default::default()
        };
        let (_, t_loose) = advi_fit(&model, &loose).unwrap();
        let (_, t_tight) = advi_fit(&model, &tight).unwrap();
        assert!(t_loose.iterations <= t_tight.iterations);
    }

    #[test]
    fn sample_q_moments_and_density() {
        let q = MeanFieldGaussian::standard(1);
        let mut rng = rng_from_seed(10);
        let (draws, log_q) = sample_q(&q, 100_000, &mut rng);
        let mean: f64 = draws.iter().map(|d| d[0]).sum::<f64>() / 1e5;
        let var: f64 = draws.iter().map(|d| d[0] * d[0]).sum::<f64>() / 1e5 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        for (d, lq) in draws.iter().zip(&log_q).take(100) {
            assert_relative_eq!(
                *lq,
                crate::models::density::ln_normal(d[0], 0.0, 1.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let q = MeanFieldGaussian::new(vec![0.3], vec![0.1]).unwrap();
        let (d1, l1) = sample_q(&q, 1000, &mut rng_from_seed(11));
        let (d2, l2) = sample_q(&q, 1000, &mut rng_from_seed(11));
        assert_eq!(d1, d2);
        assert_eq!(l1, l2);
        let model = AnalyticGaussian::standard(2);
        let cfg = ViConfig {
            seed: 12,
            max_iters: 500,
            ..Default::default()
        };
        let (qa, ta) = advi_fit(&model, &cfg).unwrap();
        let (qb, tb) = advi_fit(&model, &cfg).unwrap();
        assert_eq!(qa, qb);
        assert_eq!(ta.elbo, tb.elbo);
    }

    #[test]
    fn config_validation() {
        let bad_tol = ViConfig {
            tol_rel_obj: 1.5,
            ..Default::default()
        };
        assert!(bad_tol.validate().is_err());
        let bad_eta = ViConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert!(bad_eta.validate().is_err());
        let bad_eval = ViConfig {
            eval_every: 0,
            ..Default::default()
        };
        assert!(bad_eval.validate().is_err());
    }
}
