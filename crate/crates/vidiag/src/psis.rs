//! Pareto-smoothed importance sampling (PSIS) and the k-hat diagnostic.
//!
//! Given draws from a proposal `q` with per-draw unnormalized log-target and
//! log-proposal values, the pipeline is:
//!
//! 1. [`log_ratios`]: importance log-ratios `log p(θ,y) - log q(θ)`, shifted
//!    by their maximum. All downstream quantities are invariant to the shift,
//!    which is why unnormalized densities are fine.
//! 2. [`psis_smooth`]: fit a generalized Pareto distribution to the `M`
//!    largest ratios (`M = min(S/5, 3√S)`), replace them by GPD quantiles at
//!    plotting positions, truncate everything at the raw maximum, and report
//!    the tail shape `k̂` with its diagnostic category.
//! 3. [`snis_estimate`] / [`psis_moments`]: self-normalized estimates
//!    `Σ h_s w_s / Σ w_s` with the smoothed weights.
//!
//! `k̂` doubles as a divergence measure: `α = 1/k̂` is the largest Rényi
//! order at which `D_α(p‖q)` stays finite ([`khat_to_renyi_order`]), so
//! `k̂ > 0.5` means infinite χ² divergence and `k̂ > 1` infinite `KL(p‖q)`.
//! An estimate of `KL(p,q)` itself can be obtained by passing
//! `h = log q - log p` to [`snis_estimate`].

use crate::error::{Error, Result};
use crate::gpd::{self, ParetoFit};
use serde::{Deserialize, Serialize};

/// Minimum number of draws accepted by [`psis_smooth`]; guarantees a tail of
/// at least five samples under the `min(S/5, 3√S)` rule.
pub const MIN_DRAWS: usize = 25;

/// Draws from a proposal plus per-draw unnormalized log densities.
#[derive(Debug, Clone)]
pub struct DrawBatch {
    /// S×K parameter draws on the unconstrained scale. K may be zero when
    /// only the log densities are known (external ingestion).
    pub draws: Vec<Vec<f64>>,
    /// Unnormalized log target `log p(θ_s, y)`, nats.
    pub log_target: Vec<f64>,
    /// Log proposal `log q(θ_s)`, nats.
    pub log_proposal: Vec<f64>,
}

impl DrawBatch {
    pub fn new(
        draws: Vec<Vec<f64>>,
        log_target: Vec<f64>,
        log_proposal: Vec<f64>,
    ) -> Result<Self> {
        let s = log_target.len();
        if log_proposal.len() != s || draws.len() != s {
            return Err(Error::LengthMismatch(format!(
                "draws ({}), log_target ({}) and log_proposal ({}) must have equal length",
                draws.len(),
                s,
                log_proposal.len()
            )));
        }
        for (i, v) in log_target.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "log_target",
                    index: i,
                });
            }
        }
        for (i, v) in log_proposal.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "log_proposal",
                    index: i,
                });
            }
        }
        let k = draws.first().map_or(0, Vec::len);
        for (i, row) in draws.iter().enumerate() {
            if row.len() != k {
                return Err(Error::LengthMismatch(format!(
                    "draw row {i} has {} coordinates, expected {k}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "draws",
                    index: i * k + j,
                });
            }
        }
        Ok(Self {
            draws,
            log_target,
            log_proposal,
        })
    }

    /// Batch carrying only log densities (no parameter values).
    pub fn from_log_densities(log_target: Vec<f64>, log_proposal: Vec<f64>) -> Result<Self> {
        let s = log_target.len();
        Self::new(vec![Vec::new(); s], log_target, log_proposal)
    }

    pub fn len(&self) -> usize {
        self.log_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_target.is_empty()
    }

    /// Parameter dimension (zero when draws were not supplied).
    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }
}

/// Importance log-ratios shifted by their maximum.
#[derive(Debug, Clone)]
pub struct LogRatios {
    /// `log_target - log_proposal - shift`; the maximum entry is 0.
    pub values: Vec<f64>,
    /// The subtracted constant (the raw maximum).
    pub shift: f64,
}

/// Compute shifted importance log-ratios `r_s = p(θ_s,y) / q(θ_s)`.
pub fn log_ratios(batch: &DrawBatch) -> LogRatios {
    let mut values: Vec<f64> = batch
        .log_target
        .iter()
        .zip(&batch.log_proposal)
        .map(|(lp, lq)| lp - lq)
        .collect();
    let shift = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for v in &mut values {
        *v -= shift;
    }
    LogRatios { values, shift }
}

/// Diagnostic category for a fitted tail shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    /// `k̂ < 0.5`: fast convergence; the approximation is close to the target.
    Good,
    /// `0.5 <= k̂ <= 0.7`: usable but imperfect; PSIS adjustment recommended.
    Ok,
    /// `k̂ > 0.7`: unreliable; reparametrize, tune, or switch to MCMC.
    Bad,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Category::Good => write!(f, "good"),
            Category::Ok => write!(f, "ok"),
            Category::Bad => write!(f, "bad"),
        }
    }
}

/// Thresholds: `< 0.5` good, `0.5..=0.7` ok, `> 0.7` bad.
pub fn khat_category(khat: f64) -> Category {
    if khat < 0.5 {
        Category::Good
    } else if khat <= 0.7 {
        Category::Ok
    } else {
        Category::Bad
    }
}

/// What happened to the ratio tail during smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailStatus {
    /// Tail fitted and replaced by GPD quantiles.
    Smoothed,
    /// All ratios equal: `q ∝ p` up to a constant. No fit is possible and
    /// none is needed; weights are uniform and the category is Good.
    ConstantRatios,
    /// The tail was too degenerate to fit (ties); weights are left raw and
    /// the category is forced to Bad — a tail like this is itself diagnostic.
    FitFailed,
}

/// Options for [`psis_smooth`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsisConfig {
    /// Report and smooth with the regularized shape `(M k̂ + 5)/(M + 10)`
    /// rather than the raw estimate. Default on.
    pub regularize_khat: bool,
}

impl Default for PsisConfig {
    fn default() -> Self {
        Self {
            regularize_khat: true,
        }
    }
}

/// Pareto-smoothed, truncated importance weights plus the k-hat diagnostic.
#[derive(Debug, Clone)]
pub struct SmoothedWeights {
    /// Smoothed log-weights on the shifted scale; every entry is `<= 0`
    /// (truncation at the raw maximum).
    pub log_weights: Vec<f64>,
    /// Constant subtracted from the raw log-ratios (see [`LogRatios`]).
    pub shift: f64,
    /// Raw tail-shape estimate; `None` when no fit was possible.
    pub khat_raw: Option<f64>,
    /// Regularized tail-shape estimate; `None` when no fit was possible.
    pub khat_reg: Option<f64>,
    /// Full fit record, when a fit succeeded.
    pub pareto_fit: Option<ParetoFit>,
    /// Diagnostic category derived from the reported shape.
    pub category: Category,
    /// Tail length `M` used for smoothing (0 when ratios were constant).
    pub tail_len: usize,
    pub status: TailStatus,
    /// The shape estimate the category was derived from (regularized or raw,
    /// per the config used to smooth).
    pub reported_khat: Option<f64>,
}

impl SmoothedWeights {
    /// Weights on the linear scale (unnormalized, max 1).
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    /// The shape estimate the category was derived from.
    pub fn khat(&self) -> Option<f64> {
        self.reported_khat
    }
}

/// Tail length rule `M = min(floor(S/5), ceil(3 sqrt(S)))`.
///
/// Floor/ceil rounding keeps `M >= 5` for all `S >= 25`.
pub fn tail_len(s: usize) -> usize {
    let by_fifth = s / 5;
    let by_sqrt = (3.0 * (s as f64).sqrt()).ceil() as usize;
    by_fifth.min(by_sqrt)
}

/// Smooth the largest importance ratios with a fitted GPD and truncate at
/// the raw maximum.
///
/// Requires `S >= 25` draws. Constant ratios and unfittable tails degrade
/// gracefully (see [`TailStatus`]); genuine input errors are returned.
pub fn psis_smooth(lr: &LogRatios, cfg: &PsisConfig) -> Result<SmoothedWeights> {
    let s = lr.values.len();
    if s < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: s,
        });
    }

    let min = lr.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = lr.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min < 1e-12 {
        return Ok(SmoothedWeights {
            log_weights: lr.values.clone(),
            shift: lr.shift,
            khat_raw: None,
            khat_reg: None,
            pareto_fit: None,
            category: Category::Good,
            tail_len: 0,
            status: TailStatus::ConstantRatios,
            reported_khat: None,
        });
    }

    let m = tail_len(s);
    debug_assert!(m >= gpd::MIN_TAIL_LEN);

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_unstable_by(|&a, &b| lr.values[a].partial_cmp(&lr.values[b]).expect("finite"));
    let cutoff = lr.values[order[s - m - 1]];
    let exp_cutoff = cutoff.exp();

    // exceedances on the ratio scale; the shift bounds every ratio by 1,
    // so no overflow regardless of how extreme the raw ratios are
    let tail: Vec<f64> = order[s - m..].iter().map(|&i| lr.values[i].exp()).collect();

    let mut log_weights = lr.values.clone();
    let (fit, status) = match gpd::fit_tail(&tail, exp_cutoff) {
        Ok(fit) => {
            let k_eff = fit.khat(cfg.regularize_khat);
            let params = gpd::GpdParams::new(0.0, fit.sigma, k_eff)?;
            for (z, &idx) in order[s - m..].iter().enumerate() {
                // plotting position (z - 0.5)/M, assigned in rank order
                let p = (z as f64 + 0.5) / m as f64;
                let replacement = exp_cutoff + gpd::quantile(p, &params)?;
                log_weights[idx] = replacement.ln();
            }
            (Some(fit), TailStatus::Smoothed)
        }
        Err(Error::DegenerateTail) | Err(Error::InsufficientTail { .. }) => {
            (None, TailStatus::FitFailed)
        }
        Err(e) => return Err(e),
    };

    // truncate at the raw weight maximum (0 on the shifted scale)
    for lw in &mut log_weights {
        if *lw > 0.0 {
            *lw = 0.0;
        }
    }

    let (khat_raw, khat_reg) = match &fit {
        Some(f) => (Some(f.khat_raw), Some(f.khat_reg)),
        None => (None, None),
    };
    let reported = fit.as_ref().map(|f| f.khat(cfg.regularize_khat));
    let category = match status {
        TailStatus::Smoothed => khat_category(reported.expect("fit present")),
        TailStatus::FitFailed => Category::Bad,
        TailStatus::ConstantRatios => unreachable!(),
    };

    Ok(SmoothedWeights {
        log_weights,
        shift: lr.shift,
        khat_raw,
        khat_reg,
        pareto_fit: fit,
        category,
        tail_len: m,
        status,
        reported_khat: reported,
    })
}

/// Self-normalized importance-sampling estimate `Σ h_s w_s / Σ w_s`.
pub fn snis_estimate(h_values: &[f64], weights: &SmoothedWeights) -> Result<f64> {
    if h_values.len() != weights.log_weights.len() {
        return Err(Error::LengthMismatch(format!(
            "h ({}) and weights ({})",
            h_values.len(),
            weights.log_weights.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (h, lw) in h_values.iter().zip(&weights.log_weights) {
        let w = lw.exp();
        num += h * w;
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(num / den)
}

/// Per-coordinate first and second moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub mean: Vec<f64>,
    pub second: Vec<f64>,
}

/// PSIS-adjusted first and second moments, coordinate by coordinate.
pub fn psis_moments(batch: &DrawBatch, weights: &SmoothedWeights) -> Result<MomentEstimates> {
    let k = batch.dim();
    let mut mean = Vec::with_capacity(k);
    let mut second = Vec::with_capacity(k);
    for i in 0..k {
        let h: Vec<f64> = batch.draws.iter().map(|row| row[i]).collect();
        mean.push(snis_estimate(&h, weights)?);
        let h2: Vec<f64> = h.iter().map(|v| v * v).collect();
        second.push(snis_estimate(&h2, weights)?);
    }
    Ok(MomentEstimates { mean, second })
}

/// Unweighted sample moments of the draws — the `w_s ≡ 1` case of the
/// estimator family, i.e. trusting the proposal completely.
pub fn plain_moments(batch: &DrawBatch) -> MomentEstimates {
    let k = batch.dim();
    let s = batch.len() as f64;
    let mut mean = vec![0.0; k];
    let mut second = vec![0.0; k];
    for row in &batch.draws {
        for i in 0..k {
            mean[i] += row[i];
            second[i] += row[i] * row[i];
        }
    }
    for i in 0..k {
        mean[i] /= s;
        second[i] /= s;
    }
    MomentEstimates { mean, second }
}

/// Largest Rényi-divergence order `α = 1/k̂` that is still finite.
///
/// `k̂ = 0.5` maps to the χ² boundary (`α = 2`) and `k̂ = 1` to the KL
/// boundary (`α = 1`). For `k̂ <= 0` the importance ratios are bounded
/// above and every positive order is finite; the function returns
/// `f64::INFINITY` as that sentinel.
pub fn khat_to_renyi_order(khat: f64) -> f64 {
    if khat > 0.0 {
        1.0 / khat
    } else {
        f64::INFINITY
    }
}
