//! Parametric copula models for survival times under dependent right
//! censoring, with an enriched asymmetric Laplace (EAL) location-scale
//! regression for the survival margin.
//!
//! The numeric kernels ([`laguerre_eal`], [`copula`], [`margins`],
//! [`optimizer`]) are generic over [`Real`]; the likelihood, fitting
//! pipeline, inference and simulation layers work in `f64`, and the
//! aliases below name the `f64` instantiations used there.

pub mod copula;
pub mod error;
pub mod fitter;
pub mod inference;
pub mod laguerre_eal;
pub mod likelihood;
pub mod margins;
pub mod optimizer;
pub mod quad;
pub mod scalar;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

/// EAL error distribution in double precision.
pub type Eal = laguerre_eal::EalParams<f64>;
/// Copula family plus parameter in double precision.
pub type Copula = copula::CopulaSpec<f64>;
/// EAL location-scale regression for the survival time.
pub type TMargin = margins::TMarginParams<f64>;
/// Normal location-scale regression for the censoring time.
pub type CMargin = margins::CMarginParams<f64>;
/// Heteroscedastic normal regression (simulation generator for `T`).
pub type NormalMargin = margins::NormalRegression<f64>;
