//! Extrapolated proximal gradient descent on the constraint manifold.
//!
//! Each step linearizes the weighted fit around the extrapolated point
//! `y_hat = y_prev + omega (y_prev - y_prev2)` and solves
//! `min <grad J(y_hat), y - y_hat> + l ||y - y_hat||^2` subject to the
//! manifold constraint, which is again a GTRS with `Q = l I` and multiplier
//! interval `(-l, inf)`. The damping constant is `l = 2 ||A^T W A||_F`, a
//! Lipschitz constant of the fit gradient, and the extrapolation factor is
//! `omega = (1/12) sqrt(l_prev / l)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::estimators::{
    effective_epsilon, extract_position, objective_j, update_weights, weighted_normal_matrix,
    EstimateResult, EstimatorConfig, Method, GTRS_TOL,
};
use crate::gtrs::{solve_gtrs, GtrsProblem, DEFAULT_MAX_BISECT};
use crate::measurement::DesignSystem;

/// Rolling state of the gradient iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GdState {
    /// Previous iterate `y^(k-1)`.
    pub y_prev: DVector<f64>,
    /// Second-previous iterate `y^(k-2)`.
    pub y_prev2: DVector<f64>,
    /// Damping constants of the previous and current iteration.
    pub l_prev: f64,
    pub l_curr: f64,
    /// Extrapolation factor `omega^(k)`.
    pub omega: f64,
}

/// `omega = (1/12) sqrt(l_prev / l_curr)`, zero while no previous constant
/// exists. Clamped to 1: the damping constant can drop by orders of magnitude
/// right after a weight refresh (unit weights collapse onto the robust ones),
/// and extrapolating past the full previous step makes the iteration diverge.
pub(crate) fn extrapolation_factor(l_prev: f64, l_curr: f64) -> f64 {
    if l_curr > 0.0 {
        ((l_prev / l_curr).sqrt() / 12.0).min(1.0)
    } else {
        0.0
    }
}

pub(crate) struct GdOutcome {
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// The gradient loop, reusable by the hybrid with a warm start. Stops when
/// the step norm drops below `delta`.
pub(crate) fn gd_loop(
    design: &DesignSystem,
    epsilon: f64,
    delta: f64,
    max_iter: usize,
    start: GdState,
    mut w: DVector<f64>,
) -> Result<GdOutcome> {
    let p = design.a.ncols();
    let identity = DMatrix::identity(p, p);
    let mut state = start;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=max_iter {
        let normal = weighted_normal_matrix(design, &w);
        state.l_curr = 2.0 * normal.norm();
        if !(state.l_curr > 0.0) {
            return Err(Error::InvalidArgument("vanishing gradient Lipschitz constant")
                .at_iteration(k));
        }
        state.omega = extrapolation_factor(state.l_prev, state.l_curr);
        let y_hat = &state.y_prev + state.omega * (&state.y_prev - &state.y_prev2);

        // c = -A^T W (A y_hat - b) + l y_hat; the lambda * f part is supplied
        // by the GTRS solve itself.
        let weighted_residuals = DVector::from_iterator(
            design.rows(),
            design.residuals(&y_hat).iter().zip(w.iter()).map(|(&e, &wi)| wi * e),
        );
        let c = -(design.a.transpose() * weighted_residuals) + state.l_curr * &y_hat;
        let problem = GtrsProblem::new(
            state.l_curr * &identity,
            c,
            design.d.clone(),
            design.f.clone(),
            -state.l_curr,
        )
        .map_err(|e| e.at_iteration(k))?;
        let solution = solve_gtrs(&problem, GTRS_TOL, DEFAULT_MAX_BISECT)
            .map_err(|e| e.at_iteration(k))?;

        let y = solution.y;
        w = update_weights(&y, design, epsilon);
        trace.push(objective_j(&y, &w, design, epsilon)?);
        let step = (&y - &state.y_prev).norm();
        state.y_prev2 = core::mem::replace(&mut state.y_prev, y);
        state.l_prev = state.l_curr;
        iterations = k;
        if step < delta {
            converged = true;
            break;
        }
    }

    Ok(GdOutcome { y: state.y_prev, w, trace, iterations, converged })
}

/// Least-squares initializer `y0 = pinv(A) b` via a rank-revealing solve.
pub(crate) fn pseudoinverse_init(design: &DesignSystem) -> Result<DVector<f64>> {
    let svd = design.a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > s_max * 1e-12) {
        return Err(Error::DegenerateGeometry {
            condition: if s_min > 0.0 { s_max / s_min } else { f64::INFINITY },
        });
    }
    svd.solve(&design.b, s_max * 1e-12)
        .map_err(|_| Error::DegenerateGeometry { condition: f64::INFINITY })
}

/// SR-GD estimate: cold start from the unconstrained least-squares point with
/// unit weights and `l_prev = 0` (so the first step uses no extrapolation).
pub fn sr_gd(design: &DesignSystem, config: &EstimatorConfig) -> Result<EstimateResult> {
    config.validate()?;
    let y0 = pseudoinverse_init(design)?;
    let start = GdState {
        y_prev: y0.clone(),
        y_prev2: y0,
        l_prev: 0.0,
        l_curr: 0.0,
        omega: 0.0,
    };
    let w0 = DVector::from_element(design.rows(), 1.0);
    let epsilon = effective_epsilon(design, config.epsilon);
    let out = gd_loop(design, epsilon, config.delta, config.max_iter, start, w0)?;
    let n = design.dim();
    Ok(EstimateResult {
        x_hat: extract_position(&out.y),
        alpha: out.y[n],
        weights: out.w,
        objective_trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
        method: Method::SrGd,
        switch_iteration: None,
        elapsed: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{epsilon_from_sigma, sr_irls};
    use crate::measurement::{
        build_design, sample_measurements, NoiseModel, OutlierKind, OutlierMode, SensorArray,
    };
    use crate::seed::rng_from;
    use rand::Rng;
    use std::vec;

    #[test]
    fn first_iteration_has_no_extrapolation() {
        assert_eq!(extrapolation_factor(0.0, 123.0), 0.0);
        assert_eq!(extrapolation_factor(0.0, 0.0), 0.0);
        let same = extrapolation_factor(9.0, 9.0);
        assert!((same - 1.0 / 12.0).abs() < 1e-15);
    }

    fn noiseless_design() -> (DesignSystem, DVector<f64>) {
        let sensors = SensorArray::from_rows(&[
            &[0.0, 0.0],
            &[9.0, 1.0],
            &[2.0, 8.0],
            &[7.0, 7.0],
        ])
        .unwrap();
        let x = DVector::from_row_slice(&[3.0, 4.5]);
        let noise = NoiseModel::new(1e-12, 0.0, OutlierKind::Uniform { d_max: 1.0 }).unwrap();
        let mut rng = rng_from(21, &[]);
        let ranges =
            sample_measurements(&mut rng, &x, &sensors, &noise, 1, OutlierMode::PerSample).unwrap();
        (build_design(&sensors, &ranges).unwrap(), x)
    }

    #[test]
    fn noiseless_gd_matches_irls() {
        let (design, x) = noiseless_design();
        let gd = sr_gd(&design, &EstimatorConfig::gd(1.0)).unwrap();
        let irls = sr_irls(&design, &EstimatorConfig::irls(1.0)).unwrap();
        assert!((&gd.x_hat - &x).norm() < 1e-6);
        assert!((&gd.x_hat - &irls.x_hat).norm() < 1e-6);
        assert!(gd.converged);
    }

    #[test]
    fn gd_needs_more_iterations_than_irls_on_noisy_data() {
        let epsilon = epsilon_from_sigma(55.0).unwrap();
        let mut gd_wins = 0;
        let total = 10;
        for seed in 0..total {
            let mut rng = rng_from(seed, &[0xEE]);
            let rows: Vec<Vec<f64>> = (0..8)
                .map(|_| vec![rng.random_range(0.0..4000.0), rng.random_range(0.0..4000.0)])
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let sensors = SensorArray::from_rows(&refs).unwrap();
            let x = DVector::from_row_slice(&[
                rng.random_range(0.0..4000.0),
                rng.random_range(0.0..4000.0),
            ]);
            let noise = NoiseModel::new(
                55.0,
                0.3,
                OutlierKind::Uniform { d_max: 4000.0 * 2.0_f64.sqrt() },
            )
            .unwrap();
            let ranges =
                sample_measurements(&mut rng, &x, &sensors, &noise, 1, OutlierMode::PerSensor)
                    .unwrap();
            let design = build_design(&sensors, &ranges).unwrap();
            let gd = sr_gd(&design, &EstimatorConfig::gd(epsilon)).unwrap();
            let irls = sr_irls(&design, &EstimatorConfig::irls(epsilon)).unwrap();
            if gd.iterations > irls.iterations {
                gd_wins += 1;
            }
        }
        assert!(gd_wins >= 8, "GD took more iterations in only {gd_wins}/{total} runs");
    }
}
