//! Local sensitivity diagnostics for Bayesian models, computed from
//! posterior draws.
//!
//! Given the per-draw log-likelihood contributions of each observation, and
//! optionally the per-draw parameters of each observation's predictive
//! distribution, the crate computes
//!
//! * influence: the covariance `V` of log-likelihood contributions, `LINF`,
//!   `DINF`, the WAIC penalties `p_W` and `p_W*`, `p_V` and the prior-data
//!   conflict ratio `p_V / p_W` ([`influence`]);
//! * leverage: Bayesian hat values estimated from two independent draw
//!   streams, `p_D*` and conformal leverage ([`leverage`]);
//! * outlyingness: the outlier matrix, its eigendecomposition, `CLOUT` and
//!   truncated `CLOUT` ([`outliers`]).
//!
//! [`linear_oracle`] gives closed forms for the conjugate normal linear model
//! with known variance and an exact posterior sampler, used to check every
//! Monte Carlo estimator.
//!
//! The `bayes-lens` binary wraps these modules; see [`cli`].

pub mod cli;
pub mod eigen;
pub mod influence;
pub mod leverage;
pub mod linear_oracle;
pub mod outliers;
pub mod sample_store;
pub mod stats;

pub use influence::{CovMatrix, InfluenceReport, Perturbation};
pub use leverage::HatValues;
pub use linear_oracle::{LinearDiagnostics, LinearModelSpec};
pub use outliers::OutlierDecomposition;
pub use sample_store::{GroupMap, LogLikSamples, PredictiveDraws};
pub use stats::Estimate;
