//! Uncertainty quantification for regression with metric-space responses.
//!
//! Responses live in a [`Space`] (Euclidean vectors, quantile functions under
//! the 2-Wasserstein metric, or graph Laplacians under Frobenius). A
//! [`GlobalFrechetModel`] predicts conditional Fréchet means, residual
//! distances on a held-out split calibrate [`PredictionRegion`]s, the
//! [`dcov`] permutation test picks a constant or local radius, and
//! [`selection`] ranks predictors by leave-one-out loss differences.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dcov;
pub mod error;
pub mod frechet;
pub mod metric;
pub mod region;
pub mod rng;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use frechet::{CovarianceDenominator, FrechetWeights, GlobalFrechetModel, PredictorMatrix};
pub use metric::{D2Choice, LaplacianGraph, MetricPoint, QuantileFunction, Space, SpaceKind};
pub use region::{Center, PredictionRegion, RadiusRule, ResidualSample};
