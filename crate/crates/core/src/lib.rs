//! Quasi-Bayesian GMM inference under partial identification.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod criterion;
pub mod diagnostics;
pub mod error;
pub mod examples;
pub mod grid;
pub mod limit;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod region;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases.
pub type MomentModel64 = model::MomentModel<f64>;
pub type Prior64 = model::Prior<f64>;
pub type Dataset64 = model::Dataset<f64>;
pub type ParamBox64 = model::ParamBox<f64>;
pub type LambdaRegion64 = model::LambdaRegion<f64>;
pub type DensityGrid64 = limit::DensityGrid<f64>;
pub type RegionGrid64 = region::RegionGrid<f64>;
pub type Chain64 = sampler::Chain<f64>;

/// Single-precision aliases.
pub type MomentModel32 = model::MomentModel<f32>;
pub type Prior32 = model::Prior<f32>;
pub type Dataset32 = model::Dataset<f32>;
pub type DensityGrid32 = limit::DensityGrid<f32>;
pub type RegionGrid32 = region::RegionGrid<f32>;
