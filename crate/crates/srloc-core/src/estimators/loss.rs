//! Robust loss functions and scale tuning.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Loss families related by the convex-surrogate construction: the
/// Geman-McClure loss, its closest convex approximation, and the Huber norm
/// whose cut-off calibrates the scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    GemanMcclure,
    Huber,
    GmConvex,
}

/// Evaluate a robust loss at residual `x` with the given scale parameter
/// (`epsilon` for the Geman-McClure family, `tau` for Huber).
pub fn robust_loss(kind: LossKind, x: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument("loss scale must be > 0"));
    }
    Ok(match kind {
        LossKind::GemanMcclure => x * x / (x * x + scale * scale),
        LossKind::Huber => {
            if x.abs() < scale {
                0.5 * x * x
            } else {
                scale * x.abs() - 0.5 * scale * scale
            }
        }
        LossKind::GmConvex => {
            let knee = scale / 3.0_f64.sqrt();
            if x.abs() < knee {
                x * x / (x * x + scale * scale)
            } else {
                (3.0 * x.abs() / knee - 1.0) / 8.0
            }
        }
    })
}

/// Scale rule `epsilon = 1.34 sqrt(3) sigma`: matching the Geman-McClure
/// convex surrogate's cut-off to the 95%-efficient Huber threshold
/// `tau = 1.34 sigma`.
pub fn epsilon_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument("sigma must be > 0"));
    }
    Ok(1.34 * 3.0_f64.sqrt() * sigma)
}

/// Normalized median-absolute-deviation scale estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadEstimate {
    /// `1.4826 * median(|e_i - median(e)|)`.
    pub sigma: f64,
    /// All residuals identical; the estimate is zero and unusable.
    pub degenerate: bool,
}

/// Robust scale from residuals via the normalized MAD.
pub fn estimate_sigma_mad(residuals: &[f64]) -> Result<MadEstimate> {
    if residuals.len() < 2 {
        return Err(Error::InvalidArgument("MAD needs at least 2 residuals"));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("residuals must be finite"));
    }
    let med = median(residuals);
    let deviations: Vec<f64> = residuals.iter().map(|&e| (e - med).abs()).collect();
    let mad = median(&deviations);
    Ok(MadEstimate { sigma: 1.4826 * mad, degenerate: mad == 0.0 })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn epsilon_rule_values() {
        let eps = epsilon_from_sigma(55.0).unwrap();
        assert_eq!(eps, 1.34 * 3.0_f64.sqrt() * 55.0);
        assert_relative_eq!(eps, 127.65214451782623, epsilon = 1e-9);
        assert_relative_eq!(epsilon_from_sigma(1.0).unwrap(), 2.3209480821422952, epsilon = 1e-12);
        // Inverse identity.
        assert_relative_eq!(
            epsilon_from_sigma(1.0 / (1.34 * 3.0_f64.sqrt())).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(epsilon_from_sigma(0.0).is_err());
        assert!(epsilon_from_sigma(-1.0).is_err());
    }

    #[test]
    fn geman_mcclure_values() {
        let eps = 0.7;
        assert_eq!(robust_loss(LossKind::GemanMcclure, 0.0, eps).unwrap(), 0.0);
        assert_relative_eq!(
            robust_loss(LossKind::GemanMcclure, eps, eps).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn huber_branches_agree_at_knee() {
        let tau = 1.7;
        let quad = 0.5 * tau * tau;
        let lin = tau * tau - 0.5 * tau * tau;
        assert_relative_eq!(quad, lin, epsilon = 1e-15);
        assert_relative_eq!(robust_loss(LossKind::Huber, tau, tau).unwrap(), quad, epsilon = 1e-15);
        // Strictly inside / outside each branch.
        assert_relative_eq!(robust_loss(LossKind::Huber, 0.5, tau).unwrap(), 0.125, epsilon = 1e-15);
        assert_relative_eq!(
            robust_loss(LossKind::Huber, 10.0, tau).unwrap(),
            tau * 10.0 - 0.5 * tau * tau,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gm_convex_branches_agree_at_knee() {
        let eps = 2.4;
        let knee = eps / 3.0_f64.sqrt();
        let inner = knee * knee / (knee * knee + eps * eps);
        assert_relative_eq!(inner, 0.25, epsilon = 1e-15);
        let outer = (3.0 * knee / knee - 1.0) / 8.0;
        assert_relative_eq!(outer, 0.25, epsilon = 1e-15);
        let at_knee = robust_loss(LossKind::GmConvex, knee, eps).unwrap();
        assert_relative_eq!(at_knee, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn loss_rejects_bad_scale() {
        assert!(robust_loss(LossKind::GemanMcclure, 1.0, 0.0).is_err());
        assert!(robust_loss(LossKind::Huber, 1.0, -2.0).is_err());
    }

    #[test]
    fn mad_examples() {
        let est = estimate_sigma_mad(&[-1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(est.sigma, 1.4826, epsilon = 1e-12);
        assert!(!est.degenerate);

        let est = estimate_sigma_mad(&[5.0; 8]).unwrap();
        assert_eq!(est.sigma, 0.0);
        assert!(est.degenerate);

        assert!(estimate_sigma_mad(&[1.0]).is_err());
    }

    #[test]
    fn mad_recovers_gaussian_sigma() {
        let mut rng = crate::seed::rng_from(17, &[]);
        let normal = Normal::new(0.0, 55.0).unwrap();
        let draws: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let est = estimate_sigma_mad(&draws).unwrap();
        assert!((est.sigma - 55.0).abs() < 0.05 * 55.0, "sigma {}", est.sigma);
    }

    #[test]
    fn huber_dominates_gm_for_large_residuals() {
        // The bounded loss saturates at 1; Huber keeps growing.
        let mut rng = crate::seed::rng_from(5, &[]);
        for _ in 0..50 {
            let x: f64 = rng.random_range(10.0..1e4);
            let gm = robust_loss(LossKind::GemanMcclure, x, 1.0).unwrap();
            assert!(gm <= 1.0);
            assert!(robust_loss(LossKind::Huber, x, 1.34).unwrap() > gm);
        }
    }
}
