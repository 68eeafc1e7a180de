//! Cramér–Rao lower bound on position RMSE under the mixture error model.
//!
//! For i.i.d. range errors the Fisher information matrix factors into a
//! per-measurement scalar `I_v = E[(p'_V(v) / p_V(v))^2]` times the geometry
//! term `sum_i K u_i u_i^T` with unit bearings `u_i = (x - a_i) / ||x - a_i||`.
//! The scalar has no closed form for contaminated mixtures and is
//! approximated by Monte Carlo integration with the analytic density
//! derivative; the uniform component is flat on its interior, so only the
//! Gaussian parts contribute to the score numerator.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::measurement::{NoiseModel, SensorArray};

/// Monte Carlo estimate of the per-measurement Fisher scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherScalar {
    /// `E[(p'_V / p_V)^2]`, in 1/meters^2.
    pub value: f64,
    /// Draws used.
    pub mc_samples: usize,
    /// Standard error of the Monte Carlo mean.
    pub std_error: f64,
}

impl FisherScalar {
    /// Exact scalar for a known value (e.g. the Gaussian case `1 / sigma^2`).
    pub fn exact(value: f64) -> Self {
        Self { value, mc_samples: 0, std_error: 0.0 }
    }
}

/// Monte Carlo approximation of `E[(p'_V(v)/p_V(v))^2]` under `v ~ p_V`.
pub fn fisher_scalar<R: Rng + ?Sized>(
    noise: &NoiseModel,
    mc_samples: usize,
    rng: &mut R,
) -> Result<FisherScalar> {
    noise.validate()?;
    if mc_samples < 1_000 {
        return Err(Error::InvalidArgument("fisher_scalar needs at least 1000 samples"));
    }
    let sampler = noise.sampler()?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_samples {
        let v = sampler.sample(rng);
        let p = noise.pdf(v);
        // Uniform-support endpoints (a null set) and underflowed tails are
        // skipped; they carry no information mass.
        if p <= 0.0 {
            continue;
        }
        let score = noise.pdf_deriv(v) / p;
        let contribution = score * score;
        sum += contribution;
        sum_sq += contribution * contribution;
    }
    let n = mc_samples as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok(FisherScalar { value: mean, mc_samples, std_error: (variance / n).sqrt() })
}

/// Lower bound on the per-coordinate position RMSE,
/// `sqrt(trace(FIM^{-1}) / n)` with `FIM = I_v sum_i K u_i u_i^T`.
pub fn crlb_rmse(
    x: &DVector<f64>,
    sensors: &SensorArray,
    fisher: &FisherScalar,
    samples_per_sensor: usize,
) -> Result<f64> {
    let n = sensors.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if samples_per_sensor == 0 {
        return Err(Error::InvalidArgument("samples_per_sensor must be >= 1"));
    }
    if !(fisher.value > 0.0) {
        return Err(Error::InvalidArgument("Fisher scalar must be > 0"));
    }

    let mut geometry = DMatrix::zeros(n, n);
    for i in 0..sensors.count() {
        let diff = x - sensors.position(i);
        let dist = diff.norm();
        if dist == 0.0 {
            return Err(Error::InvalidArgument("target coincides with a sensor"));
        }
        let u = diff / dist;
        for a in 0..n {
            for b in 0..n {
                geometry[(a, b)] += u[a] * u[b];
            }
        }
    }
    let fim = fisher.value * samples_per_sensor as f64 * geometry;

    let eigen = SymmetricEigen::new(0.5 * (&fim + fim.transpose()));
    let e_max = eigen.eigenvalues.max();
    let e_min = eigen.eigenvalues.min();
    if !(e_min > e_max * 1e-12) {
        let condition = if e_min > 0.0 { e_max / e_min } else { f64::INFINITY };
        return Err(Error::DegenerateGeometry { condition });
    }
    let inverse = Cholesky::new(fim)
        .ok_or(Error::DegenerateGeometry { condition: f64::INFINITY })?
        .inverse();
    Ok((inverse.trace() / n as f64).sqrt())
}
