//! Diagnostics for variational inference.
//!
//! Fitting a variational approximation `q` to a posterior `p` always
//! produces *something*; this crate helps decide whether the result can be
//! trusted. Two complementary diagnostics are provided:
//!
//! - **PSIS k-hat** ([`psis`]): fit a generalized Pareto distribution to the
//!   largest importance ratios `p(θ,y)/q(θ)`. The tail shape `k̂` measures
//!   the divergence between `q` and `p` on a continuous scale
//!   (`k̂ < 0.5` good, `0.5–0.7` usable, `> 0.7` unreliable), and the
//!   Pareto-smoothed weights simultaneously reduce the error of
//!   importance-weighted moment estimates.
//! - **VSBC** ([`vsbc`]): refit the approximation on many datasets simulated
//!   from the prior and test the marginal calibration probabilities
//!   `Pr(θ⁰ < θ* | θ* ~ q)` for symmetry. Skew in a margin flags systematic
//!   over- or under-estimation of that parameter.
//!
//! The crate ships a self-contained mean-field Gaussian VI engine ([`vi`]),
//! a small zoo of Bayesian models with analytic gradients ([`models`]), and
//! an adaptive random-walk Metropolis sampler ([`reference`]) used as a
//! ground-truth oracle at desk scale.

pub mod error;
pub mod gpd;
pub mod models;
pub mod psis;
pub mod reference;
pub mod report;
pub mod rng;
pub mod vi;
pub mod vsbc;

pub use error::{Error, Result};
