//! Nonparametric estimation of time-varying matching efficiency and matching
//! elasticities for two-sided market panels.
//!
//! Engagements are modeled as `E_t = m(A_t·F_t, M_t)` with constant returns to
//! scale, where male users are independent of efficiency given female users.
//! The pipeline fits a kernel estimate of `G(E | F, M)`, traces the implied
//! distribution of efficiency over scale factors, inverts each period's rank
//! into an efficiency level and projects engagements on a quadratic in
//! `(A·F, M)` to read off elasticities.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix it to `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod efficiency;
pub mod elasticity;
pub mod error;
pub mod isotonic;
pub mod kernel_cdf;
pub mod panel;
pub mod pipeline;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use panel::{MarketObservation, MarketPanel, Period};
pub use scalar::Scalar;

pub type Estimator = kernel_cdf::ConditionalCdfEstimator<f64>;
pub type Distribution = efficiency::EfficiencyDistribution<f64>;
pub type Efficiency = efficiency::EfficiencySeries<f64>;
pub type Surface = efficiency::MatchingSurface<f64>;
pub type Fit = elasticity::LassoFit<f64>;
pub type Elasticities = elasticity::ElasticitySeries<f64>;
pub type Options = pipeline::EstimateOptions<f64>;
pub type Estimate = pipeline::Estimate<f64>;
