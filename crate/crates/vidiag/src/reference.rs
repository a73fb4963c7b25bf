//! Desk-scale ground-truth sampler: adaptive random-walk Metropolis.
//!
//! Moment errors and log-predictive-density comparisons need a reference
//! posterior. At the dimensions this crate targets, a gradient-free
//! random-walk Metropolis chain is adequate — and, unlike a gradient-based
//! sampler, it stays independent of the model-gradient code it is used to
//! validate. Isotropic Gaussian proposals; during warmup the global scale is
//! adapted toward 23.4% acceptance by Robbins-Monro on the log step size,
//! then frozen.

use crate::error::{Error, Result};
use crate::models::Model;
use crate::psis::MomentEstimates;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Target acceptance rate for the scale adaptation.
const TARGET_ACCEPT: f64 = 0.234;

/// Draws from one chain, post warmup, on the unconstrained scale.
#[derive(Debug, Clone)]
pub struct McmcChain {
    pub draws: Vec<Vec<f64>>,
    /// Post-warmup acceptance fraction.
    pub acceptance_rate: f64,
    /// Warmup iterations discarded.
    pub warmup: usize,
    /// Frozen proposal scale.
    pub scale: f64,
}

impl McmcChain {
    /// Per-coordinate first and second moments of the draws.
    pub fn moments(&self) -> MomentEstimates {
        let k = self.draws.first().map_or(0, Vec::len);
        let t = self.draws.len() as f64;
        let mut mean = vec![0.0; k];
        let mut second = vec![0.0; k];
        for row in &self.draws {
            for i in 0..k {
                mean[i] += row[i];
                second[i] += row[i] * row[i];
            }
        }
        for i in 0..k {
            mean[i] /= t;
            second[i] /= t;
        }
        MomentEstimates { mean, second }
    }
}

/// Run one adaptive random-walk Metropolis chain.
///
/// `t` post-warmup draws are returned after `warmup` adaptation iterations.
/// The model's log-joint must be finite at the all-zero initialization.
pub fn metropolis_sample(
    model: &dyn Model,
    t: usize,
    warmup: usize,
    rng: &mut ChaCha8Rng,
) -> Result<McmcChain> {
    let k = model.dim();
    let mut z = vec![0.0; k];
    let mut lp = model.log_joint(&z);
    if !lp.is_finite() {
        return Err(Error::InvalidParameter(
            "log joint not finite at the zero initialization".into(),
        ));
    }

    let mut log_scale = (2.38 / (k as f64).sqrt()).ln();
    let mut draws = Vec::with_capacity(t);
    let mut accepted_post = 0usize;
    let mut proposal = vec![0.0; k];

    for iter in 0..(warmup + t) {
        let scale = log_scale.exp();
        for i in 0..k {
            let e: f64 = StandardNormal.sample(rng);
            proposal[i] = z[i] + scale * e;
        }
        let lp_new = model.log_joint(&proposal);
        let log_alpha = lp_new - lp;
        let alpha = if log_alpha >= 0.0 {
            1.0
        } else {
            log_alpha.exp()
        };
        let accept = lp_new.is_finite() && rng.random::<f64>() < alpha;
        if accept {
            std::mem::swap(&mut z, &mut proposal);
            lp = lp_new;
        }

        if iter < warmup {
            // Robbins-Monro on the log scale with a decaying gain
            let gain = ((iter + 1) as f64).powf(-0.6);
            let alpha_finite = if lp_new.is_finite() { alpha } else { 0.0 };
            log_scale += gain * (alpha_finite - TARGET_ACCEPT);
        } else {
            if accept {
                accepted_post += 1;
            }
            draws.push(z.clone());
        }
    }

    if accepted_post == 0 {
        return Err(Error::AdaptationFailed);
    }
    Ok(McmcChain {
        draws,
        acceptance_rate: accepted_post as f64 / t as f64,
        warmup,
        scale: log_scale.exp(),
    })
}

/// Per-coordinate and aggregate L2 error of moment estimates against a
/// reference chain.
#[derive(Debug, Clone)]
pub struct MomentRmse {
    pub per_coord_first: Vec<f64>,
    pub per_coord_second: Vec<f64>,
    /// `‖E_ref[θ] - estimate‖₂`
    pub first: f64,
    /// `‖E_ref[θ²] - estimate‖₂`
    pub second: f64,
}

impl MomentRmse {
    /// Combined first+second moment error.
    pub fn combined(&self) -> f64 {
        (self.first * self.first + self.second * self.second).sqrt()
    }
}

/// Compare moment estimates against the chain's moments.
pub fn rmse_vs_reference(estimate: &MomentEstimates, chain: &McmcChain) -> Result<MomentRmse> {
    let reference = chain.moments();
    rmse_vs_moments(estimate, &reference)
}

/// Compare moment estimates against explicit reference moments.
pub fn rmse_vs_moments(
    estimate: &MomentEstimates,
    reference: &MomentEstimates,
) -> Result<MomentRmse> {
    if estimate.mean.len() != reference.mean.len() {
        return Err(Error::LengthMismatch(format!(
            "estimate ({}) and reference ({}) coordinates",
            estimate.mean.len(),
            reference.mean.len()
        )));
    }
    let per_coord_first: Vec<f64> = estimate
        .mean
        .iter()
        .zip(&reference.mean)
        .map(|(e, r)| (e - r).abs())
        .collect();
    let per_coord_second: Vec<f64> = estimate
        .second
        .iter()
        .zip(&reference.second)
        .map(|(e, r)| (e - r).abs())
        .collect();
    let first = per_coord_first.iter().map(|d| d * d).sum::<f64>().sqrt();
    let second = per_coord_second.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(MomentRmse {
        per_coord_first,
        per_coord_second,
        first,
        second,
    })
}
