//! Robust target localization from squared-range measurements.
//!
//! The crate solves the single-target localization problem: given `R` anchor
//! sensors at known positions and noisy range reports `r_i = ||x - a_i|| + v_i`,
//! estimate `x` even when a fraction of the sensors report garbage. Working in
//! squared ranges makes the residual affine in the lifted variable
//! `y = (x, alpha)` with `alpha = ||x||^2`, so every fit reduces to a
//! Generalized Trust Region Subproblem (GTRS): a quadratic objective under the
//! single quadratic constraint `y^T D y + 2 f^T y = 0`, solved globally by
//! bisection on the KKT multiplier.
//!
//! Modules:
//! - [`measurement`]: sensor geometry, mixture noise models, range sampling,
//!   and the stacked linear design system shared by all estimators.
//! - [`gtrs`]: the GTRS solver (secular equation + bisection).
//! - [`estimators`]: SR-LS, SR-IRLS, SR-GD, and the hybrid scheme, plus the
//!   robust loss functions and scale tuning.
//! - [`crlb`]: Fisher information of the mixture error and the Cramér–Rao
//!   lower bound on position RMSE.
//! - [`seed`]: deterministic stream derivation for reproducible experiments.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature is
//! on by default.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod crlb;
pub mod error;
pub mod estimators;
pub mod gtrs;
pub mod measurement;
pub mod seed;

pub use error::{Error, Result};
