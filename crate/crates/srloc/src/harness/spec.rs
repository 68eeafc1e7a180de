//! Experiment specification and its JSON schema.

use serde::{Deserialize, Serialize};
use srloc_core::estimators::Method;
use srloc_core::measurement::{NoiseModel, OutlierKind, OutlierMode};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    Scenario1,
    Scenario2,
    Custom,
}

/// Sensor/target placement rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeometrySpec {
    /// Sensors and the target drawn uniformly in `[0, extent_d]` per axis,
    /// fresh for every trial.
    UniformArea { extent: Vec<f64> },
    /// Fixed sensor coordinates; the target is drawn uniformly in the box.
    Explicit { sensors: Vec<Vec<f64>>, target_box: TargetBox },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    R,
    Sigma,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::R => "r",
            SweepParam::Sigma => "sigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Contamination mixture parameters plus the draw mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub beta: f64,
    pub outlier: OutlierKind,
    #[serde(default)]
    pub mode: OutlierMode,
}

impl NoiseSpec {
    pub fn model(&self) -> Result<NoiseModel> {
        Ok(NoiseModel::new(self.sigma, self.beta, self.outlier)?)
    }
}

fn default_crlb_mc_samples() -> usize {
    1_000_000
}

/// A full campaign description; serializable as the JSON spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioTag,
    pub geometry: GeometrySpec,
    /// Sensor count.
    pub r: usize,
    /// Samples per sensor.
    pub k: usize,
    /// Space dimension (2 or 3).
    pub n: usize,
    pub noise: NoiseSpec,
    /// Monte Carlo trials per sweep point.
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Master seed; all per-trial streams derive from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Robust loss scale override; derived from sigma when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Measure estimator wall times. Off by default so outputs are
    /// byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_crlb_mc_samples")]
    pub crlb_mc_samples: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n != 2 && self.n != 3 {
            return Err(Error::spec("/n", "space dimension must be 2 or 3"));
        }
        if self.r < self.n + 1 {
            return Err(Error::spec("/r", "need at least n + 1 sensors"));
        }
        if self.k == 0 {
            return Err(Error::spec("/k", "need at least one sample per sensor"));
        }
        if self.trials == 0 {
            return Err(Error::spec("/trials", "need at least one trial"));
        }
        if self.methods.is_empty() {
            return Err(Error::spec("/methods", "select at least one method"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::spec(format!("/methods/{i}"), "duplicate method"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::spec("/epsilon", "epsilon must be > 0"));
            }
        }
        if self.crlb_mc_samples < 1_000 {
            return Err(Error::spec("/crlb_mc_samples", "need at least 1000 samples"));
        }
        self.noise
            .model()
            .map_err(|e| Error::spec("/noise", e.to_string()))?;

        match &self.geometry {
            GeometrySpec::UniformArea { extent } => {
                if extent.len() != self.n {
                    return Err(Error::spec("/geometry/extent", "extent length must equal n"));
                }
                if extent.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                    return Err(Error::spec("/geometry/extent", "extent entries must be > 0"));
                }
            }
            GeometrySpec::Explicit { sensors, target_box } => {
                if sensors.len() < self.r {
                    return Err(Error::spec(
                        "/geometry/sensors",
                        format!("need at least r = {} sensor rows", self.r),
                    ));
                }
                for (i, row) in sensors.iter().enumerate() {
                    if row.len() != self.n {
                        return Err(Error::spec(
                            format!("/geometry/sensors/{i}"),
                            "coordinate length must equal n",
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::spec(
                            format!("/geometry/sensors/{i}"),
                            "coordinates must be finite",
                        ));
                    }
                }
                if target_box.min.len() != self.n || target_box.max.len() != self.n {
                    return Err(Error::spec(
                        "/geometry/target_box",
                        "box bounds must have length n",
                    ));
                }
                for d in 0..self.n {
                    if !(target_box.min[d] < target_box.max[d]) {
                        return Err(Error::spec(
                            format!("/geometry/target_box/min/{d}"),
                            "box min must be below max",
                        ));
                    }
                }
            }
        }

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::spec("/sweep/values", "sweep needs at least one value"));
            }
            for (i, v) in sweep.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::spec(format!("/sweep/values/{i}"), "value must be finite"));
                }
                if i > 0 && !(sweep.values[i - 1] < *v) {
                    return Err(Error::spec(
                        format!("/sweep/values/{i}"),
                        "sweep values must be strictly increasing",
                    ));
                }
                match sweep.param {
                    SweepParam::Beta => {
                        if !(0.0..=1.0).contains(v) {
                            return Err(Error::spec(
                                format!("/sweep/values/{i}"),
                                "beta must lie in [0, 1]",
                            ));
                        }
                    }
                    SweepParam::R => {
                        if v.fract() != 0.0 || *v < (self.n + 1) as f64 {
                            return Err(Error::spec(
                                format!("/sweep/values/{i}"),
                                "r values must be integers >= n + 1",
                            ));
                        }
                        if let GeometrySpec::Explicit { sensors, .. } = &self.geometry {
                            if *v > sensors.len() as f64 {
                                return Err(Error::spec(
                                    format!("/sweep/values/{i}"),
                                    "r exceeds the explicit sensor list",
                                ));
                            }
                        }
                    }
                    SweepParam::Sigma => {
                        if !(*v > 0.0) {
                            return Err(Error::spec(
                                format!("/sweep/values/{i}"),
                                "sigma must be > 0",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Sweep values, or the single implicit point (the configured beta).
    pub fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            Some(sweep) => sweep.values.clone(),
            None => vec![self.noise.beta],
        }
    }

    /// R and noise model with one sweep value applied.
    pub fn at_sweep_value(&self, value: f64) -> Result<(usize, NoiseModel)> {
        let mut noise = self.noise.clone();
        let mut r = self.r;
        match self.sweep.as_ref().map(|s| s.param) {
            Some(SweepParam::Beta) => noise.beta = value,
            Some(SweepParam::R) => r = value as usize,
            Some(SweepParam::Sigma) => noise.sigma = value,
            None => {}
        }
        Ok((r, noise.model()?))
    }

    /// Loss scale at one sweep point: the explicit override, else the
    /// sigma-derived rule.
    pub fn epsilon_at(&self, noise: &NoiseModel) -> Result<f64> {
        match self.epsilon {
            Some(eps) => Ok(eps),
            None => Ok(srloc_core::estimators::epsilon_from_sigma(noise.sigma)?),
        }
    }
}
