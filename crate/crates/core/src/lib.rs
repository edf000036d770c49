//! Bounds on Sobol' sensitivity indices from generalized chaos expansions.
//!
//! The crate builds per-input orthonormal bases from the eigenfunctions of the
//! Poincaré differential operator `L h = w h'' + (w' - w V') h'` attached to each
//! input law `p = exp(-V)`, and turns truncated Parseval sums over those bases
//! into lower bounds of total indices. Derivative-based twins of those bounds,
//! weight-free Fisher-information bounds, the monomial bound for uniform inputs
//! and the classical DGSM upper bound are provided alongside reference
//! estimators (pick-freeze, tensor quadrature ANOVA).
//!
//! Module map:
//!
//! - [`distributions`]: input laws, densities, scores, Fisher information, sampling.
//! - [`spectral`]: finite-element and closed-form eigenbases of the operator.
//! - [`estimators`]: evaluation samples and every bound/index estimator.
//! - [`testfunctions`]: benchmark models with exact gradients.
//! - [`quadrature`], [`tridiagonal`], [`spline`]: numerical building blocks.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod quadrature;
pub mod spectral;
pub mod spline;
pub mod testfunctions;
pub mod tridiagonal;

pub use distributions::{Distribution1D, Family};
pub use error::{Error, Result};
pub use estimators::{
    BoundEstimate, BoundKind, ConfidenceInterval, EvaluationSample, MultiIndex, Target,
};
pub use spectral::{SpectralBasis, SpectralSource, Weight};
pub use testfunctions::ModelFunction;
