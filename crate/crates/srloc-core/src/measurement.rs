//! Sensor geometry, mixture noise models, range sampling, and the stacked
//! linear design system consumed by every estimator.
//!
//! A measurement is `r_i = ||x - a_i|| + v_i` where the error `v_i` follows
//! the two-mode contamination mixture
//! `p_V(v) = (1 - beta) N(v; 0, sigma^2) + beta H(v)`.
//! Squaring the ranges and lifting `alpha = ||x||^2` turns each residual into
//! the affine expression `a_tilde_i^T y - b_i` with `y = (x, alpha)`,
//! `a_tilde_i = [-2 a_i^T, 1]` and `b_i = r_i^2 - ||a_i||^2`; the rows stack
//! sensor-major into the design pair `(A, b)`. The constraint data
//! `D = diag(I_n, 0)`, `f = (0, ..., 0, -0.5)` encodes `||x||^2 = alpha`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};

/// Non-positive sampled ranges are replaced by this value.
pub const RANGE_CLAMP: f64 = 1e-5;

/// Condition-number limit above which a design matrix counts as rank
/// deficient.
pub const MAX_CONDITION: f64 = 1e12;

/// Known anchor positions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorArray {
    coords: DMatrix<f64>,
}

impl SensorArray {
    /// Build from an `R x n` coordinate matrix. Requires `n` in {2, 3},
    /// `R >= n + 1`, finite entries, and pairwise distinct rows.
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        let (r, n) = coords.shape();
        if n != 2 && n != 3 {
            return Err(Error::InvalidArgument("space dimension must be 2 or 3"));
        }
        if r < n + 1 {
            return Err(Error::InvalidArgument(
                "need at least n + 1 sensors to determine (x, alpha)",
            ));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sensor coordinates must be finite"));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if coords.row(i) == coords.row(j) {
                    return Err(Error::InvalidArgument("duplicate sensor positions"));
                }
            }
        }
        Ok(Self { coords })
    }

    /// Convenience constructor from row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty sensor list"));
        }
        let n = rows[0].len();
        if rows.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.iter().map(|r| r.len()).find(|&l| l != n).unwrap_or(n),
            });
        }
        let coords = DMatrix::from_row_iterator(rows.len(), n, rows.iter().flat_map(|r| r.iter().copied()));
        Self::new(coords)
    }

    /// Space dimension `n`.
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Sensor count `R`.
    pub fn count(&self) -> usize {
        self.coords.nrows()
    }

    /// Position of sensor `i` as an owned column vector.
    pub fn position(&self, i: usize) -> DVector<f64> {
        self.coords.row(i).transpose()
    }

    /// The raw `R x n` coordinate matrix.
    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }
}

/// Outlier error distribution `H(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutlierKind {
    /// Uniform on `[-d_max, d_max]`.
    Uniform { d_max: f64 },
    /// Gaussian with mean `mu` and standard deviation `sigma` (NLOS bias).
    ShiftedGaussian { mu: f64, sigma: f64 },
}

impl OutlierKind {
    fn validate(&self) -> Result<()> {
        match *self {
            OutlierKind::Uniform { d_max } => {
                if !(d_max > 0.0) || !d_max.is_finite() {
                    return Err(Error::InvalidArgument("uniform outlier needs d_max > 0"));
                }
            }
            OutlierKind::ShiftedGaussian { mu, sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
                    return Err(Error::InvalidArgument(
                        "shifted-Gaussian outlier needs finite mu and sigma > 0",
                    ));
                }
            }
        }
        Ok(())
    }

    fn pdf(&self, v: f64) -> f64 {
        match *self {
            OutlierKind::Uniform { d_max } => {
                if v.abs() <= d_max {
                    1.0 / (2.0 * d_max)
                } else {
                    0.0
                }
            }
            OutlierKind::ShiftedGaussian { mu, sigma } => normal_pdf(v, mu, sigma),
        }
    }

    /// Derivative of the density; zero on the interior of a uniform support
    /// (the endpoints are a null set and contribute nothing to expectations).
    fn pdf_deriv(&self, v: f64) -> f64 {
        match *self {
            OutlierKind::Uniform { .. } => 0.0,
            OutlierKind::ShiftedGaussian { mu, sigma } => {
                -(v - mu) / (sigma * sigma) * normal_pdf(v, mu, sigma)
            }
        }
    }
}

/// Whether contamination is drawn independently per sample or assigned to a
/// fixed set of `floor(beta * R)` sensors per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutlierMode {
    /// Bernoulli(beta) flag per measurement sample.
    #[default]
    PerSample,
    /// Exactly `floor(beta * R)` sensors, chosen uniformly without
    /// replacement, report outliers in all their samples.
    PerSensor,
}

/// Two-mode contamination mixture for the range error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    /// Inlier standard deviation (meters).
    pub sigma: f64,
    /// Contamination ratio in `[0, 1]`.
    pub beta: f64,
    /// Outlier distribution.
    pub outlier: OutlierKind,
}

impl NoiseModel {
    pub fn new(sigma: f64, beta: f64, outlier: OutlierKind) -> Result<Self> {
        let model = Self { sigma, beta, outlier };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument("sigma must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument("beta must lie in [0, 1]"));
        }
        self.outlier.validate()
    }

    /// Mixture density `(1 - beta) N(v; 0, sigma^2) + beta H(v)`.
    pub fn pdf(&self, v: f64) -> f64 {
        (1.0 - self.beta) * normal_pdf(v, 0.0, self.sigma) + self.beta * self.outlier.pdf(v)
    }

    /// Derivative of the mixture density (almost everywhere).
    pub fn pdf_deriv(&self, v: f64) -> f64 {
        (1.0 - self.beta) * (-v / (self.sigma * self.sigma)) * normal_pdf(v, 0.0, self.sigma)
            + self.beta * self.outlier.pdf_deriv(v)
    }

    /// Prepared sampler with the component distributions built once.
    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        let inlier = Normal::new(0.0, self.sigma)
            .map_err(|_| Error::InvalidArgument("sigma must be > 0"))?;
        let outlier = match self.outlier {
            OutlierKind::Uniform { d_max } => OutlierSampler::Uniform(
                Uniform::new_inclusive(-d_max, d_max)
                    .map_err(|_| Error::InvalidArgument("uniform outlier needs d_max > 0"))?,
            ),
            OutlierKind::ShiftedGaussian { mu, sigma } => OutlierSampler::Gaussian(
                Normal::new(mu, sigma)
                    .map_err(|_| Error::InvalidArgument("outlier sigma must be > 0"))?,
            ),
        };
        Ok(NoiseSampler { beta: self.beta, inlier, outlier })
    }
}

/// Draws error values from a validated [`NoiseModel`].
#[derive(Debug, Clone, Copy)]
pub struct NoiseSampler {
    beta: f64,
    inlier: Normal<f64>,
    outlier: OutlierSampler,
}

#[derive(Debug, Clone, Copy)]
enum OutlierSampler {
    Uniform(Uniform<f64>),
    Gaussian(Normal<f64>),
}

impl NoiseSampler {
    /// One draw from the full mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let outlier = rng.random_bool(self.beta);
        self.sample_component(rng, outlier)
    }

    /// One draw from a forced component.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R, outlier: bool) -> f64 {
        if outlier {
            match self.outlier {
                OutlierSampler::Uniform(u) => u.sample(rng),
                OutlierSampler::Gaussian(g) => g.sample(rng),
            }
        } else {
            self.inlier.sample(rng)
        }
    }
}

/// Gaussian density.
pub(crate) fn normal_pdf(v: f64, mu: f64, sigma: f64) -> f64 {
    let z = (v - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * core::f64::consts::PI).sqrt())
}

/// Measured distances, `K` samples per sensor in sensor-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSet {
    ranges: Vec<f64>,
    sensors: usize,
    samples_per_sensor: usize,
}

impl RangeSet {
    pub fn new(ranges: Vec<f64>, sensors: usize, samples_per_sensor: usize) -> Result<Self> {
        if samples_per_sensor == 0 || sensors == 0 {
            return Err(Error::InvalidArgument("range set must be non-empty"));
        }
        if ranges.len() != sensors * samples_per_sensor {
            return Err(Error::DimensionMismatch {
                expected: sensors * samples_per_sensor,
                got: ranges.len(),
            });
        }
        if ranges.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("ranges must be strictly positive"));
        }
        Ok(Self { ranges, sensors, samples_per_sensor })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn samples_per_sensor(&self) -> usize {
        self.samples_per_sensor
    }

    /// Sample `k` of sensor `i`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.ranges[i * self.samples_per_sensor + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.ranges
    }
}

/// Euclidean distance between a target and a sensor position.
pub fn true_range(x: &DVector<f64>, a: &DVector<f64>) -> Result<f64> {
    if x.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: a.len() });
    }
    if x.iter().chain(a.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("points must be finite"));
    }
    Ok((x - a).norm())
}

/// Draw one range realization per sensor and sample under the contamination
/// mixture. Non-positive draws are clamped to [`RANGE_CLAMP`]. Deterministic
/// given the generator state.
pub fn sample_measurements<R: Rng + ?Sized>(
    rng: &mut R,
    x: &DVector<f64>,
    sensors: &SensorArray,
    noise: &NoiseModel,
    samples_per_sensor: usize,
    mode: OutlierMode,
) -> Result<RangeSet> {
    noise.validate()?;
    if samples_per_sensor == 0 {
        return Err(Error::InvalidArgument("need at least one sample per sensor"));
    }
    if x.len() != sensors.dim() {
        return Err(Error::DimensionMismatch { expected: sensors.dim(), got: x.len() });
    }

    let r = sensors.count();
    let sampler = noise.sampler()?;

    // Pre-select the contaminated sensors in the fixed-count mode.
    let mut sensor_is_outlier = vec![false; r];
    if mode == OutlierMode::PerSensor {
        let count = (noise.beta * r as f64).floor() as usize;
        let mut indices: Vec<usize> = (0..r).collect();
        for i in 0..count.min(r) {
            let j = rng.random_range(i..r);
            indices.swap(i, j);
            sensor_is_outlier[indices[i]] = true;
        }
    }

    let mut ranges = Vec::with_capacity(r * samples_per_sensor);
    for i in 0..r {
        let d = true_range(x, &sensors.position(i))?;
        for _ in 0..samples_per_sensor {
            let outlier = match mode {
                OutlierMode::PerSample => rng.random_bool(noise.beta),
                OutlierMode::PerSensor => sensor_is_outlier[i],
            };
            let v = sampler.sample_component(rng, outlier);
            let range = d + v;
            ranges.push(if range > 0.0 { range } else { RANGE_CLAMP });
        }
    }
    RangeSet::new(ranges, r, samples_per_sensor)
}

/// The stacked linearized system: rows `[-2 a_i^T, 1]` of `A`, right side
/// `b_i = r_i^2 - ||a_i||^2`, and the constraint pair `(D, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub d: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Two-norm condition estimate of `A`.
    pub condition: f64,
}

impl DesignSystem {
    /// Number of stacked measurement rows (`R * K`).
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Space dimension `n` (the lifted dimension is `n + 1`).
    pub fn dim(&self) -> usize {
        self.a.ncols() - 1
    }

    /// Residual vector `A y - b` at a lifted point.
    pub fn residuals(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y - &self.b
    }

    /// Constraint value `y^T D y + 2 f^T y` (zero on the manifold).
    pub fn constraint_value(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.d * y)[(0, 0)] + 2.0 * self.f.dot(y)
    }
}

/// Assemble the design system, sensor-major and sample-minor. Fails with a
/// condition estimate when `A` is numerically rank deficient (e.g. all
/// sensors collinear in 2-D).
pub fn build_design(sensors: &SensorArray, ranges: &RangeSet) -> Result<DesignSystem> {
    if ranges.sensors() != sensors.count() {
        return Err(Error::DimensionMismatch {
            expected: sensors.count(),
            got: ranges.sensors(),
        });
    }
    let n = sensors.dim();
    let k = ranges.samples_per_sensor();
    let m = sensors.count() * k;
    let p = n + 1;

    let mut a = DMatrix::zeros(m, p);
    let mut b = DVector::zeros(m);
    for i in 0..sensors.count() {
        let pos = sensors.position(i);
        let norm_sq = pos.norm_squared();
        for s in 0..k {
            let row = i * k + s;
            for j in 0..n {
                a[(row, j)] = -2.0 * pos[j];
            }
            a[(row, n)] = 1.0;
            let r = ranges.get(i, s);
            b[row] = r * r - norm_sq;
        }
    }

    let sv = a.clone().singular_values();
    let s_max = sv.max();
    let s_min = sv.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::DegenerateGeometry { condition });
    }

    let mut d = DMatrix::identity(p, p);
    d[(n, n)] = 0.0;
    let mut f = DVector::zeros(p);
    f[n] = -0.5;

    Ok(DesignSystem { a, b, d, f, condition })
}
