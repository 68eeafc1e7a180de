//! Error type shared by all core modules.

use alloc::boxed::Box;
use core::fmt;

use crate::gtrs::GtrsSolution;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone)]
pub enum Error {
    /// Vectors of mismatched length were combined.
    DimensionMismatch { expected: usize, got: usize },
    /// A precondition on an argument was violated.
    InvalidArgument(&'static str),
    /// The design matrix is (numerically) rank deficient, e.g. collinear
    /// sensors in 2-D. Carries the condition-number estimate.
    DegenerateGeometry { condition: f64 },
    /// `Q + lambda * D` is numerically singular; the multiplier sits too close
    /// to the boundary of the positive-definite interval.
    GtrsNearBoundary { lambda: f64, condition: f64 },
    /// Bracket expansion found no sign change of the secular function (the
    /// GTRS hard case; signals degenerate geometry upstream).
    GtrsNoRoot { expansions: usize },
    /// Bisection hit its iteration cap; the best iterate found so far is
    /// attached.
    GtrsMaxBisections { best: Box<GtrsSolution> },
    /// An error occurred inside an iterative estimator; wraps the source with
    /// the iteration index at which it happened.
    AtIteration { iteration: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::DegenerateGeometry { condition } => {
                write!(f, "degenerate geometry (condition estimate {condition:.3e})")
            }
            Error::GtrsNearBoundary { lambda, condition } => write!(
                f,
                "GTRS system near-singular at lambda = {lambda:.6e} (condition {condition:.3e})"
            ),
            Error::GtrsNoRoot { expansions } => write!(
                f,
                "GTRS secular equation has no root after {expansions} bracket expansions (hard case)"
            ),
            Error::GtrsMaxBisections { best } => write!(
                f,
                "GTRS bisection cap reached (best |phi| = {:.3e})",
                best.phi_residual
            ),
            Error::AtIteration { iteration, source } => {
                write!(f, "at iteration {iteration}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::AtIteration { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// Wrap with the estimator iteration at which the error surfaced.
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
