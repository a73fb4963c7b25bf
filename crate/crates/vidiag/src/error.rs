//! Crate-wide error type.

/// Errors produced by the diagnostics pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violated its documented domain (e.g. `sigma <= 0`).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input value was outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite value was found during ingestion.
    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },

    /// Vector lengths that must agree did not.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// Too few draws for the requested operation.
    #[error("too few draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    /// Fewer than the minimum number of positive exceedances.
    #[error("insufficient tail: need at least {needed} exceedances above the threshold, got {got}")]
    InsufficientTail { needed: usize, got: usize },

    /// All exceedances equal; the generalized Pareto fit is undefined.
    #[error("degenerate tail: all exceedances are equal")]
    DegenerateTail,

    /// The importance weights sum to zero.
    #[error("degenerate weights: importance weights sum to zero")]
    DegenerateWeights,

    /// The stochastic optimizer produced a non-finite objective.
    #[error("optimizer diverged at iteration {iter}: ELBO became non-finite")]
    OptimizerDiverged {
        iter: usize,
        /// ELBO evaluations recorded before divergence.
        trace: Vec<f64>,
    },

    /// The model log-joint stayed non-finite after the retry budget.
    #[error("log joint non-finite after {attempts} attempts")]
    NonFiniteLogJoint { attempts: usize },

    /// Metropolis warmup ended with no accepted proposals.
    #[error("metropolis adaptation failed: no proposals accepted after warmup")]
    AdaptationFailed,

    /// Too many VSBC replications failed to fit.
    #[error("vsbc aborted: {failed} of {total} replications diverged (limit {limit_pct}%)")]
    TooManyVsbcFailures {
        failed: usize,
        total: usize,
        limit_pct: u8,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
