//! Generalized Trust Region Subproblem solver.
//!
//! Minimizes `y^T Q y - 2 c^T y` subject to the single quadratic equality
//! `y^T D y + 2 f^T y = 0`. For any admissible multiplier the stationary point
//! is `y(lambda) = (Q + lambda D)^{-1} (c - lambda f)`; the characteristic
//! (secular) function
//! `phi(lambda) = y(lambda)^T D y(lambda) + 2 f^T y(lambda)`
//! is strictly decreasing on the interval where `Q + lambda D` is positive
//! definite, so the KKT multiplier is found by bisection on
//! `(lambda_low, infinity)`.

use alloc::boxed::Box;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::measurement::DesignSystem;

/// Default bisection tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default bisection iteration cap. Double-precision secular roots stabilize
/// well before 200 halvings.
pub const DEFAULT_MAX_BISECT: usize = 200;

/// Bracket expansions allowed before declaring the hard case.
const MAX_EXPANSIONS: usize = 200;

/// Condition estimate above which `Q + lambda D` counts as singular.
const CONDITION_CAP: f64 = 1e-3 / f64::EPSILON;

/// One GTRS instance: objective `y^T Q y - 2 c^T y` plus constraint `(D, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GtrsProblem {
    /// Symmetric positive-semidefinite quadratic term.
    pub q: DMatrix<f64>,
    /// Linear term (the objective is `y^T Q y - 2 c^T y + const`).
    pub c: DVector<f64>,
    /// Constraint quadratic `diag(I_n, 0)`.
    pub d: DMatrix<f64>,
    /// Constraint linear part `(0, ..., 0, -0.5)`.
    pub f: DVector<f64>,
    /// Lower endpoint of the admissible multiplier interval.
    pub lambda_low: f64,
}

impl GtrsProblem {
    pub fn new(
        q: DMatrix<f64>,
        c: DVector<f64>,
        d: DMatrix<f64>,
        f: DVector<f64>,
        lambda_low: f64,
    ) -> Result<Self> {
        let problem = Self { q, c, d, f, lambda_low };
        problem.validate()?;
        Ok(problem)
    }

    /// Reweighted squared-range instance: `Q = A^T W A`, `c = A^T W b` with
    /// `W = diag(w)`, and the diagonal multiplier bound.
    pub fn from_weighted_design(design: &DesignSystem, weights: &DVector<f64>) -> Result<Self> {
        let m = design.rows();
        if weights.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: weights.len() });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive and finite"));
        }
        let p = design.a.ncols();
        let mut q = DMatrix::zeros(p, p);
        let mut c = DVector::zeros(p);
        for r in 0..m {
            let w = weights[r];
            for i in 0..p {
                let awi = w * design.a[(r, i)];
                c[i] += awi * design.b[r];
                for j in 0..p {
                    q[(i, j)] += awi * design.a[(r, j)];
                }
            }
        }
        let lambda_low = lambda_lower_bound(&q)?;
        Ok(Self { q, c, d: design.d.clone(), f: design.f.clone(), lambda_low })
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.q.nrows();
        if self.q.ncols() != p || p < 2 {
            return Err(Error::InvalidArgument("Q must be square and at least 2x2"));
        }
        if self.c.len() != p || self.d.shape() != (p, p) || self.f.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.c.len() });
        }
        if !self.lambda_low.is_finite()
            || self.q.iter().any(|v| !v.is_finite())
            || self.c.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("problem data must be finite"));
        }
        let scale = self.q.amax();
        let asym = (&self.q - self.q.transpose()).amax();
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidArgument("Q must be symmetric"));
        }
        // The constraint data is structural: D = diag(I_n, 0), f = (0, .., -0.5).
        let n = p - 1;
        for i in 0..p {
            for j in 0..p {
                let expected = if i == j && i < n { 1.0 } else { 0.0 };
                if self.d[(i, j)] != expected {
                    return Err(Error::InvalidArgument("D must equal diag(I_n, 0)"));
                }
            }
            let expected = if i == n { -0.5 } else { 0.0 };
            if self.f[i] != expected {
                return Err(Error::InvalidArgument("f must equal (0, .., 0, -0.5)"));
            }
        }
        Ok(())
    }

    /// Constraint value `y^T D y + 2 f^T y` at a point.
    pub fn constraint_value(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.d * y)[(0, 0)] + 2.0 * self.f.dot(y)
    }

    /// Objective value `y^T Q y - 2 c^T y` at a point.
    pub fn objective_value(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.q * y)[(0, 0)] - 2.0 * self.c.dot(y)
    }
}

/// Solver output: the minimizer plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GtrsSolution {
    /// Lifted minimizer `y = (x, alpha)`.
    pub y: DVector<f64>,
    /// KKT multiplier.
    pub lambda: f64,
    /// `|phi(lambda)|` at the returned multiplier.
    pub phi_residual: f64,
    /// Norm of the stationarity residual `(Q + lambda D) y - c + lambda f`.
    pub kkt_residual: f64,
    /// Bisection iterations spent.
    pub bisection_iters: usize,
}

/// The diagonal multiplier bound `max{-Q_ii, i = 1..n}`; the last diagonal
/// entry (the lifted coordinate, where `D` vanishes) is excluded.
pub fn lambda_lower_bound(q: &DMatrix<f64>) -> Result<f64> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Q must be finite"));
    }
    let p = q.nrows();
    if p < 2 {
        return Err(Error::InvalidArgument("Q must be at least 2x2"));
    }
    let mut bound = f64::NEG_INFINITY;
    for i in 0..p - 1 {
        bound = bound.max(-q[(i, i)]);
    }
    Ok(bound)
}

/// The generalized-eigenvalue interval endpoint `-1 / lambda_1(D, Q)`, a
/// tighter alternative to [`lambda_lower_bound`]. Diagnostic only; requires
/// `Q` positive definite.
pub fn lambda_interval_eigen(q: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(q.clone())
        .ok_or(Error::InvalidArgument("eigenvalue bound needs positive-definite Q"))?;
    // lambda_1(D, Q) = max eig of L^{-1} D L^{-T} with Q = L L^T.
    let l = chol.l();
    let x = l
        .solve_lower_triangular(d)
        .ok_or(Error::InvalidArgument("singular Cholesky factor"))?;
    let m = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::InvalidArgument("singular Cholesky factor"))?
        .transpose();
    let sym = 0.5 * (&m + m.transpose());
    let top = SymmetricEigen::new(sym).eigenvalues.max();
    if top <= 0.0 {
        return Err(Error::InvalidArgument("constraint quadratic has no positive curvature"));
    }
    Ok(-1.0 / top)
}

/// Reduced secular form of one GTRS instance.
///
/// With `D = diag(I_n, 0)` and `f = (0, .., -0.5)` the lifted coordinate can
/// be eliminated: writing `Q = [Q11 q; q^T q_nn]`, the KKT system
/// `(Q + lambda D) y = c - lambda f` reduces to
/// `(S + lambda I) x = c_x - q (c_alpha + lambda/2) / q_nn` with the Schur
/// complement `S = Q11 - q q^T / q_nn`. Diagonalizing `S = U L U^T` once
/// makes every `y(lambda)` an explicit rational expression in `lambda`; the
/// shifted divisors `L_i + lambda` are formed by direct subtraction, so the
/// evaluation stays accurate arbitrarily close to the positive-definite
/// boundary, where factoring `Q + lambda D` would lose most of its digits.
struct SecularForm {
    /// Eigenvalues of the Schur complement, ascending.
    eigenvalues: DVector<f64>,
    /// Eigenvectors of the Schur complement.
    basis: DMatrix<f64>,
    /// Right side in the eigenbasis: `g0 + lambda * g1`.
    g0: DVector<f64>,
    g1: DVector<f64>,
    /// Cross block `q` and the lifted diagonal `q_nn`.
    q_cross: DVector<f64>,
    q_nn: f64,
    c_alpha: f64,
    /// Spectral magnitude of the reduced problem; multiplier shifts below
    /// `eps * lambda_scale` cannot change any divisor.
    lambda_scale: f64,
}

/// Evaluation of the secular form at one multiplier.
struct SecularPoint {
    y: DVector<f64>,
    phi: f64,
    condition: f64,
}

impl SecularForm {
    /// Returns `None` when the lifted diagonal vanishes; `Q + lambda D` is
    /// then singular for every `lambda` (the hard case surfaces upstream).
    fn build(problem: &GtrsProblem) -> Option<Self> {
        let p = problem.q.nrows();
        let n = p - 1;
        let q_nn = problem.q[(n, n)];
        if !(q_nn > 0.0) {
            return None;
        }
        let q11 = problem.q.view((0, 0), (n, n)).into_owned();
        let q_cross = problem.q.view((0, n), (n, 1)).into_owned().column(0).into_owned();
        let schur = &q11 - &q_cross * q_cross.transpose() / q_nn;
        let eigen = SymmetricEigen::new(0.5 * (&schur + schur.transpose()));
        let c_x = problem.c.rows(0, n).into_owned();
        let c_alpha = problem.c[n];
        let base = &c_x - &q_cross * (c_alpha / q_nn);
        let slope = -&q_cross * (0.5 / q_nn);
        let g0 = eigen.eigenvectors.transpose() * base;
        let g1 = eigen.eigenvectors.transpose() * slope;
        // The Schur spectrum can collapse to exact zero when one weight
        // dominates the rest past 1/eps; q_nn keeps the scale positive.
        let lambda_scale = eigen.eigenvalues.amax().max(q_nn);
        Some(Self {
            eigenvalues: eigen.eigenvalues,
            basis: eigen.eigenvectors,
            g0,
            g1,
            q_cross,
            q_nn,
            c_alpha,
            lambda_scale,
        })
    }

    /// `y(lambda)` and `phi(lambda)`; `None` left of the positive-definite
    /// interval (some shifted divisor is non-positive).
    fn solve(&self, lambda: f64) -> Option<SecularPoint> {
        let n = self.eigenvalues.len();
        let mut z = DVector::zeros(n);
        let mut d_min = f64::INFINITY;
        let mut d_max = 0.0_f64;
        for i in 0..n {
            let d = self.eigenvalues[i] + lambda;
            if !(d > 0.0) {
                return None;
            }
            d_min = d_min.min(d);
            d_max = d_max.max(d);
            z[i] = (self.g0[i] + lambda * self.g1[i]) / d;
        }
        let x = &self.basis * &z;
        let alpha = (self.c_alpha + 0.5 * lambda - self.q_cross.dot(&x)) / self.q_nn;
        let phi = z.norm_squared() - alpha;
        if phi.is_nan() {
            return None;
        }
        let mut y = DVector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(&x);
        y[n] = alpha;
        Some(SecularPoint { y, phi, condition: d_max / d_min })
    }
}

/// The characteristic function `phi(lambda)`; strictly decreasing over the
/// admissible interval. Fails with a near-boundary error when the shifted
/// system is singular or its condition estimate exceeds `1e-3 / eps`; the
/// caller shifts `lambda` rightward.
pub fn characteristic_phi(problem: &GtrsProblem, lambda: f64) -> Result<f64> {
    problem.validate()?;
    if lambda <= problem.lambda_low {
        return Err(Error::InvalidArgument("lambda must exceed lambda_low"));
    }
    let form = SecularForm::build(problem)
        .ok_or(Error::GtrsNearBoundary { lambda, condition: f64::INFINITY })?;
    let point = form
        .solve(lambda)
        .ok_or(Error::GtrsNearBoundary { lambda, condition: f64::INFINITY })?;
    if point.condition > CONDITION_CAP {
        return Err(Error::GtrsNearBoundary { lambda, condition: point.condition });
    }
    Ok(point.phi)
}

/// Solve the GTRS by bisection on the secular equation.
///
/// The search starts just right of `lambda_low` (offset
/// `1e-8 * max(1, |lambda_low|)`) and grows the upper bracket geometrically
/// (doubling from `max(1, |lambda_low|)`) until `phi < 0`. Points where the
/// shifted system cannot be factored lie left of the admissible interval and
/// count as the positive side. Stops when `|phi| <= tol` or the bracket width
/// falls below `tol * |lambda|` (or the floating-point resolution of the
/// bracket).
pub fn solve_gtrs(problem: &GtrsProblem, tol: f64, max_bisect: usize) -> Result<GtrsSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0"));
    }
    let form = SecularForm::build(problem).ok_or(Error::GtrsNoRoot { expansions: 0 })?;

    let scale = problem.lambda_low.abs().max(1.0);
    let mut lo = problem.lambda_low + 1e-8 * scale;

    // Upper bracket: expand until the secular function turns negative.
    let mut step = scale;
    let mut hi = problem.lambda_low + step;
    let mut expansions = 0usize;
    let (mut best_y, mut best_phi, mut best_lambda);
    loop {
        match form.solve(hi) {
            Some(point) if point.phi < 0.0 => {
                best_y = point.y;
                best_phi = point.phi;
                best_lambda = hi;
                break;
            }
            _ => {
                expansions += 1;
                if expansions >= MAX_EXPANSIONS {
                    return Err(Error::GtrsNoRoot { expansions });
                }
                step *= 2.0;
                hi = problem.lambda_low + step;
            }
        }
    }
    if lo >= hi {
        lo = problem.lambda_low;
    }

    let mut iters = 0usize;
    let converged = loop {
        if best_phi.abs() <= tol {
            break true;
        }
        let mid = 0.5 * (lo + hi);
        // The secular function can be extremely steep when the multiplier is
        // tiny relative to the problem scale, so the width criterion is
        // relative to |lambda| itself, floored at the spectral resolution
        // (shifts below eps * lambda_scale leave every divisor unchanged).
        // A bracket collapsed to adjacent floats cannot be refined either.
        let resolution = mid.abs() + f64::EPSILON * form.lambda_scale;
        if hi - lo <= tol * resolution + f64::MIN_POSITIVE || mid <= lo || mid >= hi {
            break true;
        }
        if iters >= max_bisect {
            #[cfg(feature = "std")]
            std::eprintln!(
                "EXHAUST lo={lo:.6e} hi={hi:.6e} width={:.3e} mid={mid:.6e} res={:.3e} lscale={:.3e} best_phi={best_phi:.3e} tol={tol:.1e}",
                hi - lo, resolution, form.lambda_scale
            );
            break false;
        }
        iters += 1;
        match form.solve(mid) {
            // Left of the positive-definite interval.
            None => lo = mid,
            Some(point) => {
                if point.phi.abs() < best_phi.abs() {
                    best_y = point.y;
                    best_phi = point.phi;
                    best_lambda = mid;
                }
                if point.phi > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    };

    let kkt = ((&problem.q + best_lambda * &problem.d) * &best_y
        - (&problem.c - best_lambda * &problem.f))
        .norm();
    let solution = GtrsSolution {
        y: best_y,
        lambda: best_lambda,
        phi_residual: best_phi.abs(),
        kkt_residual: kkt,
        bisection_iters: iters,
    };
    if converged {
        Ok(solution)
    } else {
        Err(Error::GtrsMaxBisections { best: Box::new(solution) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{build_design, RangeSet, SensorArray};
    use crate::seed::rng_from;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn consistent_problem() -> GtrsProblem {
        // Exact ranges from x = (0.5, 0.5) to three unit-corner sensors.
        let sensors =
            SensorArray::from_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let r = 0.5_f64.sqrt();
        let ranges = RangeSet::new(std::vec![r, r, r], 3, 1).unwrap();
        let design = build_design(&sensors, &ranges).unwrap();
        GtrsProblem::from_weighted_design(&design, &DVector::from_element(3, 1.0)).unwrap()
    }

    fn random_problem(seed: u64) -> GtrsProblem {
        let mut rng = rng_from(seed, &[0xD1CE]);
        let r = 4 + (seed % 4) as usize;
        let rows: Vec<Vec<f64>> = (0..r)
            .map(|_| std::vec![rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
        let sensors = SensorArray::from_rows(&refs).unwrap();
        let x = DVector::from_row_slice(&[rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]);
        let ranges: Vec<f64> = (0..r)
            .map(|i| {
                let d = (&x - sensors.position(i)).norm();
                (d + rng.random_range(-1.0..1.0)).max(1e-3)
            })
            .collect();
        let ranges = RangeSet::new(ranges, r, 1).unwrap();
        let design = build_design(&sensors, &ranges).unwrap();
        let w = DVector::from_iterator(r, (0..r).map(|_| rng.random_range(0.1..10.0)));
        GtrsProblem::from_weighted_design(&design, &w).unwrap()
    }

    #[test]
    fn diagonal_bound_reads_first_n_entries() {
        let q = DMatrix::identity(3, 3);
        assert_eq!(lambda_lower_bound(&q).unwrap(), -1.0);

        let q = DMatrix::from_diagonal(&DVector::from_row_slice(&[4.0, 9.0, 7.0]));
        assert_eq!(lambda_lower_bound(&q).unwrap(), -4.0);
    }

    #[test]
    fn diagonal_bound_on_design_normal_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, -2.0, 0.0, 1.0, 0.0, -2.0, 1.0]);
        let q = a.transpose() * &a;
        // Direct arithmetic: diag(A^T A) = (4, 4, 3); first two entries count.
        assert_eq!(lambda_lower_bound(&q).unwrap(), -4.0);
    }

    #[test]
    fn eigen_bound_is_at_least_diagonal_bound() {
        for seed in 0..20 {
            let p = random_problem(seed);
            let eig = lambda_interval_eigen(&p.q, &p.d).unwrap();
            assert!(
                eig >= p.lambda_low - 1e-9 * p.lambda_low.abs().max(1.0),
                "eig {eig} < diag {}",
                p.lambda_low
            );
        }
    }

    #[test]
    fn phi_vanishes_for_consistent_data() {
        let p = consistent_problem();
        let phi = characteristic_phi(&p, 0.0).unwrap();
        assert!(phi.abs() < 1e-12, "phi(0) = {phi}");
    }

    #[test]
    fn phi_turns_negative_for_large_lambda() {
        for seed in 0..10 {
            let p = random_problem(seed);
            let lambda = 1e12 * p.q.amax();
            assert!(characteristic_phi(&p, lambda).unwrap() < 0.0);
        }
    }

    #[test]
    fn phi_is_decreasing() {
        for seed in 0..20 {
            let p = random_problem(seed);
            let mut rng = rng_from(seed, &[7]);
            for _ in 0..10 {
                let l1 = rng.random_range(-0.9..1000.0) * p.lambda_low.abs().max(1.0);
                let l2 = l1 + rng.random_range(0.01..100.0);
                let (p1, p2) = match (characteristic_phi(&p, l1), characteristic_phi(&p, l2)) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => continue, // near-boundary evaluation, skip
                };
                assert!(p1 > p2, "phi({l1}) = {p1} <= phi({l2}) = {p2}");
            }
        }
    }

    #[test]
    fn consistent_data_recovers_exactly() {
        let p = consistent_problem();
        let sol = solve_gtrs(&p, DEFAULT_TOL, DEFAULT_MAX_BISECT).unwrap();
        assert_relative_eq!(sol.y[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.y[1], 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.y[2], 0.5, epsilon = 1e-9);
        assert!(sol.lambda.abs() < 1e-6, "lambda = {}", sol.lambda);
    }

    #[test]
    fn solutions_satisfy_kkt_and_constraint() {
        for seed in 0..50 {
            let p = random_problem(seed);
            let sol = solve_gtrs(&p, DEFAULT_TOL, DEFAULT_MAX_BISECT).unwrap();
            let y_norm_sq = sol.y.norm_squared();
            assert!(
                sol.phi_residual <= 1e-8 * (1.0 + y_norm_sq),
                "constraint residual {} too large",
                sol.phi_residual
            );
            let q_scale = p.q.norm();
            assert!(sol.kkt_residual <= 1e-6 * (q_scale * sol.y.norm() + p.c.norm()));
            // Q + lambda D stays positive semidefinite (slack for rounding).
            let shifted = &p.q + sol.lambda * &p.d;
            let min_eig = SymmetricEigen::new(0.5 * (&shifted + shifted.transpose()))
                .eigenvalues
                .min();
            assert!(min_eig >= -1e-8 * q_scale, "min eig {min_eig}");
        }
    }

    #[test]
    fn singular_lifted_block_is_the_hard_case() {
        // Q with a zero lifted-coordinate block makes Q + lambda D singular
        // for every lambda; the bracket search must report it.
        let q = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 1.0, 0.0]));
        let c = DVector::from_row_slice(&[1.0, 1.0, 1.0]);
        let mut d = DMatrix::identity(3, 3);
        d[(2, 2)] = 0.0;
        let mut f = DVector::zeros(3);
        f[2] = -0.5;
        let p = GtrsProblem::new(q, c, d, f, -1.0).unwrap();
        match solve_gtrs(&p, DEFAULT_TOL, DEFAULT_MAX_BISECT) {
            Err(Error::GtrsNoRoot { .. }) => {}
            other => panic!("expected hard-case error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn scaling_q_and_c_scales_lambda_but_not_y(seed in 0u64..200, log_s in -6.0f64..6.0) {
            let p = random_problem(seed);
            let s = 10f64.powf(log_s);
            let scaled = GtrsProblem::new(
                s * &p.q,
                s * &p.c,
                p.d.clone(),
                p.f.clone(),
                s * p.lambda_low,
            ).unwrap();
            let sol = solve_gtrs(&p, DEFAULT_TOL, DEFAULT_MAX_BISECT).unwrap();
            let sol_s = solve_gtrs(&scaled, DEFAULT_TOL, DEFAULT_MAX_BISECT).unwrap();
            prop_assert!((&sol.y - &sol_s.y).norm() <= 1e-6 * (1.0 + sol.y.norm()));
            prop_assert!((sol_s.lambda - s * sol.lambda).abs() <= 1e-6 * (1.0 + (s * sol.lambda).abs()));
        }
    }
}
