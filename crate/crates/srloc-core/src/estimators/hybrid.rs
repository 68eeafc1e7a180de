//! Hybrid scheme: IRLS for speed, gradient steps for a guaranteed finish.
//!
//! Runs the IRLS updates until the objective change falls below the relative
//! switch threshold, then continues with extrapolated gradient steps from the
//! IRLS iterate, carrying over the weights. The damping constant of the
//! handover is computed from the IRLS-final weights, so the first gradient
//! step starts with `omega = 1/12`.

use crate::error::Result;
use crate::estimators::gd::{gd_loop, GdState};
use crate::estimators::irls::irls_loop;
use crate::estimators::{
    effective_epsilon, extract_position, weighted_normal_matrix, EstimateResult, EstimatorConfig,
    Method,
};
use crate::measurement::DesignSystem;

/// IRLS-phase iteration cap; the objective typically flattens within a
/// handful of iterations.
const IRLS_PHASE_CAP: usize = 100;

/// SR-Hybrid estimate. `config.hybrid_switch_delta` scales the relative
/// objective-change switch rule; `config.delta`/`config.max_iter` govern the
/// gradient phase.
pub fn sr_hybrid(design: &DesignSystem, config: &EstimatorConfig) -> Result<EstimateResult> {
    config.validate()?;
    let epsilon = effective_epsilon(design, config.epsilon);
    let phase1 = irls_loop(design, epsilon, IRLS_PHASE_CAP, |prev, cur| {
        (cur - prev).abs() < config.hybrid_switch_delta * (1.0 + cur.abs())
    })?;
    let switch_iteration = phase1.iterations;

    let l_warm = 2.0 * weighted_normal_matrix(design, &phase1.w).norm();
    let start = GdState {
        y_prev: phase1.y.clone(),
        y_prev2: phase1.y,
        l_prev: l_warm,
        l_curr: 0.0,
        omega: 0.0,
    };
    let phase2 = gd_loop(design, epsilon, config.delta, config.max_iter, start, phase1.w)?;

    let mut trace = phase1.trace;
    trace.extend_from_slice(&phase2.trace);
    let n = design.dim();
    Ok(EstimateResult {
        x_hat: extract_position(&phase2.y),
        alpha: phase2.y[n],
        weights: phase2.w,
        objective_trace: trace,
        iterations: switch_iteration + phase2.iterations,
        converged: phase2.converged,
        method: Method::SrHybrid,
        switch_iteration: Some(switch_iteration),
        elapsed: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{epsilon_from_sigma, sr_gd, sr_irls};
    use crate::measurement::{
        build_design, sample_measurements, NoiseModel, OutlierKind, OutlierMode, SensorArray,
    };
    use crate::seed::rng_from;
    use nalgebra::DVector;
    use rand::Rng;
    use std::vec;

    #[test]
    fn noiseless_hybrid_matches_irls() {
        let sensors = SensorArray::from_rows(&[
            &[0.0, 0.0],
            &[9.0, 1.0],
            &[2.0, 8.0],
            &[7.0, 7.0],
        ])
        .unwrap();
        let x = DVector::from_row_slice(&[3.0, 4.5]);
        let noise = NoiseModel::new(1e-12, 0.0, OutlierKind::Uniform { d_max: 1.0 }).unwrap();
        let mut rng = rng_from(4, &[]);
        let ranges =
            sample_measurements(&mut rng, &x, &sensors, &noise, 1, OutlierMode::PerSample).unwrap();
        let design = build_design(&sensors, &ranges).unwrap();

        let hybrid = sr_hybrid(&design, &EstimatorConfig::hybrid(1.0)).unwrap();
        let irls = sr_irls(&design, &EstimatorConfig::irls(1.0)).unwrap();
        assert!((&hybrid.x_hat - &irls.x_hat).norm() < 1e-9 * (1.0 + irls.x_hat.norm()));
        assert!(hybrid.converged);
        assert!(hybrid.switch_iteration.is_some());
    }

    #[test]
    fn hybrid_iteration_count_sits_between_irls_and_gd() {
        let epsilon = epsilon_from_sigma(55.0).unwrap();
        let mut between = 0;
        let total = 10;
        for seed in 0..total {
            let mut rng = rng_from(seed, &[0xF00D]);
            let rows: Vec<Vec<f64>> = (0..10)
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
                0.4,
                OutlierKind::Uniform { d_max: 4000.0 * 2.0_f64.sqrt() },
            )
            .unwrap();
            let ranges =
                sample_measurements(&mut rng, &x, &sensors, &noise, 1, OutlierMode::PerSensor)
                    .unwrap();
            let design = build_design(&sensors, &ranges).unwrap();
            let hybrid = sr_hybrid(&design, &EstimatorConfig::hybrid(epsilon)).unwrap();
            let irls = sr_irls(&design, &EstimatorConfig::irls(epsilon)).unwrap();
            let gd = sr_gd(&design, &EstimatorConfig::gd(epsilon)).unwrap();
            if hybrid.iterations >= irls.iterations && hybrid.iterations < gd.iterations {
                between += 1;
            }
        }
        assert!(between >= 8, "hybrid sat between IRLS and GD in only {between}/{total} runs");
    }
}

