//! Position estimators on the lifted squared-range system.
//!
//! All four methods minimize variants of the robust objective
//! `J(y, w) = sum_i w_i (a_tilde_i^T y - b_i)^2 + sum_i (eps^2 w_i - ln w_i)`
//! over the constraint manifold `||x||^2 = alpha`:
//!
//! - [`sr_ls`]: plain squared-range least squares, one GTRS solve with unit
//!   weights. Fast, not robust.
//! - [`sr_irls`]: alternate a weighted GTRS solve with the closed-form weight
//!   update `w_i = 1 / (e_i^2 + eps^2)`; the objective is non-increasing.
//! - [`sr_gd`]: extrapolated proximal gradient steps, each projected onto the
//!   manifold through a GTRS solve; slower but whole-sequence convergent.
//! - [`sr_hybrid`]: IRLS until the objective flattens, then gradient steps.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::gtrs::{solve_gtrs, GtrsProblem, DEFAULT_MAX_BISECT};
use crate::measurement::DesignSystem;

/// Multiplier tolerance for the inner GTRS solves. The alternating loops
/// compare consecutive objective values down to `1e-9 * (1 + |J|)`, which
/// needs the per-iteration minimizer resolved to near machine precision.
pub(crate) const GTRS_TOL: f64 = 1e-14;

mod gd;
mod hybrid;
mod irls;
mod loss;

pub use gd::{sr_gd, GdState};
pub use hybrid::sr_hybrid;
pub use irls::sr_irls;
pub use loss::{epsilon_from_sigma, estimate_sigma_mad, robust_loss, LossKind, MadEstimate};

/// Estimator selector, also used as a stable tag in experiment outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    SrLs,
    SrIrls,
    SrGd,
    SrHybrid,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SrLs, Method::SrIrls, Method::SrGd, Method::SrHybrid];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SrLs => "sr_ls",
            Method::SrIrls => "sr_irls",
            Method::SrGd => "sr_gd",
            Method::SrHybrid => "sr_hybrid",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sr_ls" | "sr-ls" => Ok(Method::SrLs),
            "sr_irls" | "sr-irls" => Ok(Method::SrIrls),
            "sr_gd" | "sr-gd" => Ok(Method::SrGd),
            "sr_hybrid" | "sr-hybrid" => Ok(Method::SrHybrid),
            _ => Err(Error::InvalidArgument("unknown method name")),
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Iteration controls shared by the iterative estimators.
///
/// `delta` is the convergence tolerance: SR-IRLS stops on the objective
/// change `|J_k - J_{k-1}| < delta`, SR-GD on the step norm
/// `||y_k - y_{k-1}|| < delta`. `hybrid_switch_delta` is the relative
/// objective-change factor at which the hybrid hands over from IRLS to
/// gradient steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Robust loss scale (squared-range residual units).
    pub epsilon: f64,
    /// Convergence tolerance.
    pub delta: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Relative objective-change threshold for the IRLS -> GD switch.
    pub hybrid_switch_delta: f64,
}

impl EstimatorConfig {
    /// SR-IRLS defaults: objective tolerance `1e-6`, 100 iterations.
    pub fn irls(epsilon: f64) -> Self {
        Self { epsilon, delta: 1e-6, max_iter: 100, hybrid_switch_delta: 1e-4 }
    }

    /// SR-GD defaults: step tolerance `1e-8`, 5000 iterations.
    pub fn gd(epsilon: f64) -> Self {
        Self { epsilon, delta: 1e-8, max_iter: 5000, hybrid_switch_delta: 1e-4 }
    }

    /// Hybrid defaults: GD-phase tolerances plus the switch factor `1e-4`.
    pub fn hybrid(epsilon: f64) -> Self {
        Self { epsilon, delta: 1e-8, max_iter: 5000, hybrid_switch_delta: 1e-4 }
    }

    pub fn for_method(method: Method, epsilon: f64) -> Self {
        match method {
            Method::SrLs | Method::SrIrls => Self::irls(epsilon),
            Method::SrGd => Self::gd(epsilon),
            Method::SrHybrid => Self::hybrid(epsilon),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be > 0"));
        }
        if !(self.delta > 0.0) || !(self.hybrid_switch_delta > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1"));
        }
        Ok(())
    }
}

/// One point of the alternating iteration, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedIterate {
    /// Lifted point `(x, alpha)`.
    pub y: DVector<f64>,
    /// Weight vector.
    pub w: DVector<f64>,
    /// Objective `J(y, w)`.
    pub objective: f64,
    /// Residuals `e_i = a_tilde_i^T y - b_i`.
    pub residuals: DVector<f64>,
}

impl LiftedIterate {
    /// The iterate at `y` with weights freshly updated from its residuals.
    pub fn at(design: &DesignSystem, y: DVector<f64>, epsilon: f64) -> Result<Self> {
        let w = update_weights(&y, design, epsilon);
        let objective = objective_j(&y, &w, design, epsilon)?;
        let residuals = design.residuals(&y);
        Ok(Self { y, w, objective, residuals })
    }
}

/// Estimate plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Estimated position (first `n` entries of the final lifted point).
    pub x_hat: DVector<f64>,
    /// Lifted scalar `alpha` of the final point.
    pub alpha: f64,
    /// Final weights; small values flag suspected outliers.
    pub weights: DVector<f64>,
    /// Objective value after the weight update of each iteration.
    pub objective_trace: Vec<f64>,
    /// Iterations spent (both phases, for the hybrid).
    pub iterations: usize,
    /// Whether the stopping rule fired before the iteration cap.
    pub converged: bool,
    pub method: Method,
    /// Iteration at which the hybrid switched from IRLS to gradient steps.
    pub switch_iteration: Option<usize>,
    /// Wall time in seconds, filled in by callers that time the run.
    pub elapsed: f64,
}

/// First `n` entries of a lifted vector `y = (x, alpha)`.
pub fn extract_position(y: &DVector<f64>) -> DVector<f64> {
    y.rows(0, y.len() - 1).into_owned()
}

/// The robust objective
/// `sum_i w_i e_i^2 + sum_i (eps^2 w_i - ln w_i)`.
pub fn objective_j(
    y: &DVector<f64>,
    w: &DVector<f64>,
    design: &DesignSystem,
    epsilon: f64,
) -> Result<f64> {
    if w.len() != design.rows() {
        return Err(Error::DimensionMismatch { expected: design.rows(), got: w.len() });
    }
    if w.iter().any(|&wi| !(wi > 0.0)) {
        return Err(Error::InvalidArgument("weights must be > 0"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be > 0"));
    }
    let e = design.residuals(y);
    let eps_sq = epsilon * epsilon;
    let mut total = 0.0;
    for i in 0..w.len() {
        total += w[i] * e[i] * e[i] + eps_sq * w[i] - w[i].ln();
    }
    Ok(total)
}

/// Closed-form weight update `w_i = 1 / (e_i^2 + eps^2)`, the global
/// minimizer of `J(y, .)` for fixed `y`.
pub fn update_weights(y: &DVector<f64>, design: &DesignSystem, epsilon: f64) -> DVector<f64> {
    debug_assert!(epsilon > 0.0);
    let e = design.residuals(y);
    let eps_sq = epsilon * epsilon;
    DVector::from_iterator(e.len(), e.iter().map(|&ei| 1.0 / (ei * ei + eps_sq)))
}

/// Numerically effective loss scale. Residuals below the floating-point
/// resolution of the stacked right side are indistinguishable from zero, and
/// an epsilon below that level makes the regularized objective reward exact
/// interpolation of arbitrary row subsets; the floor keeps the weight update
/// saturated at the noise level instead.
pub(crate) fn effective_epsilon(design: &DesignSystem, epsilon: f64) -> f64 {
    epsilon.max(256.0 * f64::EPSILON * design.b.amax())
}

/// `A^T W A` for diagonal `W = diag(w)`.
pub(crate) fn weighted_normal_matrix(design: &DesignSystem, w: &DVector<f64>) -> DMatrix<f64> {
    let p = design.a.ncols();
    let mut q = DMatrix::zeros(p, p);
    for r in 0..design.rows() {
        for i in 0..p {
            let awi = w[r] * design.a[(r, i)];
            for j in 0..p {
                q[(i, j)] += awi * design.a[(r, j)];
            }
        }
    }
    q
}

/// Squared-range least squares: one GTRS solve with unit weights.
pub fn sr_ls(design: &DesignSystem) -> Result<EstimateResult> {
    let w = DVector::from_element(design.rows(), 1.0);
    let problem = GtrsProblem::from_weighted_design(design, &w)?;
    let sol = solve_gtrs(&problem, GTRS_TOL, DEFAULT_MAX_BISECT)?;
    let n = design.dim();
    let fit = design.residuals(&sol.y).norm_squared();
    Ok(EstimateResult {
        x_hat: extract_position(&sol.y),
        alpha: sol.y[n],
        weights: w,
        objective_trace: vec![fit],
        iterations: 1,
        converged: true,
        method: Method::SrLs,
        switch_iteration: None,
        elapsed: 0.0,
    })
}
