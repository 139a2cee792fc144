//! Tangent-space proximal step.
//!
//! Given a frame `X`, an ambient gradient `G`, a prox stepsize `mu`, and an
//! l1 weight `gamma`, find
//!
//! ```text
//! V* = argmin over tangent V of  <G,V> + ||V||^2/(2 mu) + gamma ||X+V||_1.
//! ```
//!
//! The tangency constraint `X'V + V'X = 0` is handled through a symmetric
//! multiplier `Lambda`. For fixed `Lambda`, the unconstrained minimizer is a
//! shrinkage step
//!
//! ```text
//! V(Lambda) = soft_threshold(X - mu (G - X Lambda), mu gamma) - X,
//! ```
//!
//! and the multiplier is driven to the constraint by damped fixed-point
//! updates `Lambda <- Lambda - sigma E(Lambda)`, `E = X'V + V'X`, with the
//! step `sigma` starting at `1/(2 mu)` and halving until the residual norm
//! decreases. With `gamma = 0` the first update lands exactly on
//! `Lambda* = sym(X'G)`, reproducing `V = -mu Proj(G)`.

use nalgebra::DMatrix;

use crate::error::{DroPcaError, Result};
use crate::model::{l1_value, soft_threshold};
use crate::stiefel::{project_tangent, StiefelPoint, TangentVector};

/// Inputs of one proximal step. `g` is the ambient gradient of the smooth
/// part at `x`; `mu` is both the smoothing parameter and the prox stepsize.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub x: &'a StiefelPoint,
    pub g: &'a DMatrix<f64>,
    pub mu: f64,
    pub gamma: f64,
}

impl<'a> SubproblemSpec<'a> {
    pub fn new(x: &'a StiefelPoint, g: &'a DMatrix<f64>, mu: f64, gamma: f64) -> Result<Self> {
        if x.matrix().shape() != g.shape() {
            return Err(DroPcaError::ShapeMismatch {
                expected: format!("{}x{}", x.d(), x.r()),
                actual: format!("{}x{}", g.nrows(), g.ncols()),
            });
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(DroPcaError::InvalidParameter(format!(
                "prox stepsize must be positive, got {mu}"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(DroPcaError::InvalidParameter(format!(
                "l1 weight must be nonnegative, got {gamma}"
            )));
        }
        Ok(Self { x, g, mu, gamma })
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    /// Minimizer, re-projected onto the tangent space before return.
    pub v: TangentVector,
    /// Symmetric multiplier of the tangency constraint at the solution.
    pub lambda: DMatrix<f64>,
    /// Norm of the projected optimality residual (see [`kkt_residual`]).
    pub kkt_residual: f64,
    /// Dual fixed-point steps taken.
    pub iterations: usize,
}

/// (lambda, V, E, ||E||) of one dual candidate.
type DualCandidate = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64);

const MAX_HALVINGS: u32 = 30;
const RESIDUAL_FLOOR: f64 = 1e-14;

/// Solves the tangent proximal step to constraint residual `tol`
/// (tightened internally by the multiplier norm so that downstream descent
/// estimates hold to the same order). `warm_start` seeds the multiplier,
/// typically from the previous outer iteration.
pub fn solve_tangent_prox(
    spec: &SubproblemSpec,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<SubproblemSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DroPcaError::InvalidParameter(format!(
            "subproblem tolerance must be positive, got {tol}"
        )));
    }
    let x = spec.x.matrix();
    let r = x.ncols();
    let shrinkage = spec.mu * spec.gamma;

    let candidate = |lambda: &DMatrix<f64>| -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let p = x - (spec.g - x * lambda) * spec.mu;
        let v = soft_threshold(&p, shrinkage).expect("shrinkage is nonnegative") - x;
        let xv = x.transpose() * &v;
        let e = &xv + xv.transpose();
        let e_norm = e.norm();
        (v, e, e_norm)
    };

    let mut lambda = match warm_start {
        Some(w) if w.shape() == (r, r) => crate::stiefel::sym(w),
        _ => DMatrix::zeros(r, r),
    };
    let (mut v, mut e, mut e_norm) = candidate(&lambda);
    let mut best_residual = e_norm;

    for step in 0..=max_iter {
        // tightened by the multiplier norm so <Lambda, E> stays below the
        // descent-audit slack; never looser than the caller's tol
        let target = (tol / (2.0 * lambda.norm().max(1.0)))
            .max(RESIDUAL_FLOOR)
            .min(tol);
        if e_norm <= target {
            return Ok(finish(spec, v, lambda, step));
        }
        if step == max_iter {
            break;
        }

        let mut sigma = 1.0 / (2.0 * spec.mu);
        let mut fallback: Option<DualCandidate> = None;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand_lambda = &lambda - &e * sigma;
            let (cand_v, cand_e, cand_norm) = candidate(&cand_lambda);
            if cand_norm < e_norm {
                lambda = cand_lambda;
                v = cand_v;
                e = cand_e;
                e_norm = cand_norm;
                accepted = true;
                break;
            }
            // remember the full-step candidate: in flat regions only it
            // makes progress
            if fallback.is_none() {
                fallback = Some((cand_lambda, cand_v, cand_e, cand_norm));
            }
            sigma *= 0.5;
        }
        if !accepted {
            let (fl, fv, fe, fn_) = fallback.expect("at least one candidate was evaluated");
            lambda = fl;
            v = fv;
            e = fe;
            e_norm = fn_;
        }
        best_residual = best_residual.min(e_norm);
    }

    Err(DroPcaError::SubproblemStalled {
        residual: best_residual,
        iterations: max_iter,
        tol,
    })
}

fn finish(
    spec: &SubproblemSpec,
    v: DMatrix<f64>,
    lambda: DMatrix<f64>,
    iterations: usize,
) -> SubproblemSolution {
    let v = project_tangent(spec.x, &v).expect("shapes agree");
    let mut solution = SubproblemSolution {
        v,
        lambda,
        kkt_residual: 0.0,
        iterations,
    };
    solution.kkt_residual = kkt_residual(spec, &solution);
    solution
}

/// `h(V) = <G,V> + ||V||^2/(2 mu) + gamma ||X+V||_1` for an arbitrary matrix.
pub fn subproblem_value(spec: &SubproblemSpec, v: &DMatrix<f64>) -> f64 {
    spec.g.dot(v)
        + v.norm_squared() / (2.0 * spec.mu)
        + spec.gamma * l1_value(&(spec.x.matrix() + v))
}

/// Projected stationarity residual `||Proj(G + V/mu + gamma H)||_F` with the
/// l1 subgradient chosen consistently with the prox output: `sign` on the
/// prox support, and on the complement the scaled prox input `P/(mu gamma)`,
/// the element of [-1,1] that cancels the shrinkage step exactly (clipped to
/// absorb rounding). At the exact solution the expression collapses to
/// `X Lambda`, whose tangent projection vanishes.
pub fn kkt_residual(spec: &SubproblemSpec, solution: &SubproblemSolution) -> f64 {
    let x = spec.x.matrix();
    let v = solution.v.matrix();
    let grad_part = spec.g + v / spec.mu;
    let stationarity = if spec.gamma > 0.0 {
        // support pattern comes from the prox input, not the re-projected V
        let p = x - (spec.g - x * &solution.lambda) * spec.mu;
        let shrinkage = spec.mu * spec.gamma;
        let h = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if p[(i, j)].abs() > shrinkage {
                p[(i, j)].signum()
            } else {
                (p[(i, j)] / shrinkage).clamp(-1.0, 1.0)
            }
        });
        grad_part + h * spec.gamma
    } else {
        grad_part
    };
    project_tangent(spec.x, &stationarity)
        .expect("shapes agree")
        .norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stiefel::{gaussian_matrix, random_stiefel, sym};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(
        d: usize,
        r: usize,
        mu: f64,
        gamma: f64,
        seed: u64,
    ) -> (StiefelPoint, DMatrix<f64>) {
        let x = random_stiefel(d, r, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let g = gaussian_matrix(d, r, &mut rng);
        let _ = mu;
        let _ = gamma;
        (x, g)
    }

    #[test]
    fn gamma_zero_reproduces_the_closed_form() {
        for seed in 0..25u64 {
            let (x, g) = random_instance(7, 3, 0.3, 0.0, seed);
            let spec = SubproblemSpec::new(&x, &g, 0.3, 0.0).unwrap();
            let sol = solve_tangent_prox(&spec, 1e-10, 2000, None).unwrap();

            let lambda_star = sym(&(x.matrix().transpose() * &g));
            let v_star = project_tangent(&x, &g).unwrap().scale(-0.3);

            assert!((sol.lambda - &lambda_star).norm() <= 1e-10);
            assert!((sol.v.matrix() - v_star.matrix()).norm() <= 1e-10);
            assert!(sol.kkt_residual <= 1e-10, "kkt {}", sol.kkt_residual);
            assert!(sol.iterations <= 2);
        }
    }

    #[test]
    fn two_dimensional_example() {
        let x = StiefelPoint::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let g = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let spec = SubproblemSpec::new(&x, &g, 0.5, 0.0).unwrap();
        let sol = solve_tangent_prox(&spec, 1e-12, 2000, None).unwrap();
        assert!((sol.v.matrix()[(0, 0)]).abs() <= 1e-12);
        assert!((sol.v.matrix()[(1, 0)] + 0.5).abs() <= 1e-12);
    }

    // With r = 1 and X = e1, tangency forces v1 = 0 and the subproblem
    // collapses to a scalar shrinkage per remaining coordinate.
    #[test]
    fn rank_one_matches_the_scalar_oracle() {
        for seed in 0..25u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 2 + (seed as usize % 3);
            let mut frame = DMatrix::zeros(d, 1);
            frame[(0, 0)] = 1.0;
            let x = StiefelPoint::new(frame).unwrap();
            let g = gaussian_matrix(d, 1, &mut rng);
            let mu = 0.05 + rng.gen::<f64>() * 0.5;
            let gamma = rng.gen::<f64>() * 0.8;
            let spec = SubproblemSpec::new(&x, &g, mu, gamma).unwrap();
            let sol = solve_tangent_prox(&spec, 1e-12, 4000, None).unwrap();

            assert!(sol.v.matrix()[(0, 0)].abs() <= 1e-10);
            for i in 1..d {
                let expected = g[(i, 0)].mul_add(-mu, 0.0).signum()
                    * ((mu * g[(i, 0)]).abs() - mu * gamma).max(0.0);
                assert!(
                    (sol.v.matrix()[(i, 0)] - expected).abs() <= 1e-10,
                    "seed {seed} coord {i}: got {} expected {expected}",
                    sol.v.matrix()[(i, 0)]
                );
            }
        }
    }

    // Dense grid + local refinement over a tangent basis, value agreement to
    // 1e-6. Small sizes only; this is the independent oracle.
    #[test]
    fn grid_oracle_agrees_on_small_instances() {
        for seed in 0..6u64 {
            let d = 3 + (seed as usize % 2);
            let (x, g) = random_instance(d, 1, 0.4, 0.2, seed + 40);
            let spec = SubproblemSpec::new(&x, &g, 0.4, 0.2).unwrap();
            let sol = solve_tangent_prox(&spec, 1e-12, 4000, None).unwrap();
            let solver_value = subproblem_value(&spec, sol.v.matrix());

            // orthonormal tangent basis at x for r=1: complete x to a basis
            let xm = x.matrix();
            let mut basis: Vec<DMatrix<f64>> = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
            while basis.len() < d - 1 {
                let cand = gaussian_matrix(d, 1, &mut rng);
                let mut t = &cand - xm * (xm.transpose() * &cand);
                for b in &basis {
                    t -= b * b.dot(&t);
                }
                let n = t.norm();
                if n > 1e-6 {
                    basis.push(t / n);
                }
            }

            // coarse grid then shrink around the best point
            let k = basis.len();
            let mut center = vec![0.0; k];
            let mut width = 2.0;
            let mut best = f64::INFINITY;
            for _ in 0..40 {
                let steps = 5i64;
                let mut best_coord = center.clone();
                let mut combo = vec![-steps; k];
                loop {
                    let coords: Vec<f64> = combo
                        .iter()
                        .zip(&center)
                        .map(|(&c, &m)| m + c as f64 * width / steps as f64)
                        .collect();
                    let mut vm = DMatrix::zeros(d, 1);
                    for (b, &c) in basis.iter().zip(&coords) {
                        vm += b * c;
                    }
                    let val = subproblem_value(&spec, &vm);
                    if val < best {
                        best = val;
                        best_coord = coords.clone();
                    }
                    let mut carry = 0;
                    loop {
                        if carry == k {
                            break;
                        }
                        combo[carry] += 1;
                        if combo[carry] > steps {
                            combo[carry] = -steps;
                            carry += 1;
                        } else {
                            break;
                        }
                    }
                    if carry == k {
                        break;
                    }
                }
                center = best_coord;
                width *= 0.45;
            }

            assert!(
                solver_value <= best + 1e-6,
                "seed {seed}: solver {} vs grid {}",
                solver_value,
                best
            );
            assert!(
                (solver_value - best).abs() <= 1e-6 * (1.0 + best.abs()),
                "seed {seed}: solver {} vs grid {}",
                solver_value,
                best
            );
        }
    }

    #[test]
    fn subproblem_value_basics() {
        let (x, g) = random_instance(6, 2, 0.25, 0.3, 7);
        let spec = SubproblemSpec::new(&x, &g, 0.25, 0.3).unwrap();
        let zero = DMatrix::zeros(6, 2);
        assert!((subproblem_value(&spec, &zero) - 0.3 * l1_value(x.matrix())).abs() <= 1e-14);

        let spec0 = SubproblemSpec::new(&x, &g, 0.25, 0.0).unwrap();
        let v = project_tangent(&x, &g).unwrap().scale(-0.25);
        let expected = -(0.25 / 2.0) * project_tangent(&x, &g).unwrap().norm().powi(2);
        assert!((subproblem_value(&spec0, v.matrix()) - expected).abs() <= 1e-12);
    }

    // h is (1/mu)-strongly convex, so any tangent competitor loses by at
    // least the squared distance over 2 mu.
    #[test]
    fn strong_convexity_probe_around_the_solution() {
        let (x, g) = random_instance(6, 2, 0.2, 0.15, 8);
        let spec = SubproblemSpec::new(&x, &g, 0.2, 0.15).unwrap();
        let sol = solve_tangent_prox(&spec, 1e-12, 4000, None).unwrap();
        let h_star = subproblem_value(&spec, sol.v.matrix());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let probe = project_tangent(&x, &gaussian_matrix(6, 2, &mut rng)).unwrap();
            let gap = subproblem_value(&spec, probe.matrix()) - h_star;
            let lower = (probe.matrix() - sol.v.matrix()).norm_squared() / (2.0 * spec.mu);
            assert!(gap >= lower - 1e-9, "gap {gap} < lower {lower}");
        }
    }

    #[test]
    fn descent_inequality_holds_on_returned_directions() {
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 4 + (seed as usize % 4);
            let r = 1 + (seed as usize % 2);
            let (x, g) = random_instance(d, r, 0.0, 0.0, seed + 200);
            let mu = 0.02 + rng.gen::<f64>() * 0.4;
            let gamma = if seed % 3 == 0 {
                0.0
            } else {
                rng.gen::<f64>() * 0.4
            };
            let spec = SubproblemSpec::new(&x, &g, mu, gamma).unwrap();
            let sol = solve_tangent_prox(&spec, 1e-10, 4000, None).unwrap();
            let h0 = subproblem_value(&spec, &DMatrix::zeros(d, r));
            let vn2 = sol.v.norm().powi(2);
            for alpha in [0.25, 0.5, 1.0] {
                let h_alpha = subproblem_value(&spec, &(sol.v.matrix() * alpha));
                let required = alpha * (2.0 - alpha) / (2.0 * mu) * vn2;
                assert!(
                    h0 - h_alpha >= required - 1e-8,
                    "seed {seed} alpha {alpha}: {} < {}",
                    h0 - h_alpha,
                    required
                );
            }
        }
    }

    #[test]
    fn kkt_residual_properties() {
        let (x, g) = random_instance(6, 2, 0.3, 0.2, 10);
        let spec = SubproblemSpec::new(&x, &g, 0.3, 0.2).unwrap();
        let tol = 1e-9;
        let sol = solve_tangent_prox(&spec, tol, 4000, None).unwrap();
        assert!(
            sol.kkt_residual <= 10.0 * tol,
            "kkt residual {} above contract",
            sol.kkt_residual
        );

        // V = 0 at a non-stationary point leaves a visible residual
        let zero = SubproblemSolution {
            v: TangentVector::zero(&x),
            lambda: DMatrix::zeros(2, 2),
            kkt_residual: 0.0,
            iterations: 0,
        };
        assert!(kkt_residual(&spec, &zero) > 1e-3);
    }

    #[test]
    fn tangency_before_and_after_reprojection() {
        let (x, g) = random_instance(8, 3, 0.15, 0.25, 11);
        let spec = SubproblemSpec::new(&x, &g, 0.15, 0.25).unwrap();
        let tol = 1e-8;
        let sol = solve_tangent_prox(&spec, tol, 4000, None).unwrap();
        let after = crate::stiefel::tangency_error(x.matrix(), sol.v.matrix());
        assert!(after <= 1e-14 * (1.0 + sol.v.norm()));
    }

    #[test]
    fn warm_start_does_not_change_the_answer() {
        let (x, g) = random_instance(7, 2, 0.2, 0.3, 12);
        let spec = SubproblemSpec::new(&x, &g, 0.2, 0.3).unwrap();
        let cold = solve_tangent_prox(&spec, 1e-11, 4000, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let warm_seed = sym(&gaussian_matrix(2, 2, &mut rng));
        let warm = solve_tangent_prox(&spec, 1e-11, 4000, Some(&warm_seed)).unwrap();
        assert!(
            (cold.v.matrix() - warm.v.matrix()).norm() <= 1e-8,
            "warm-start changed V by {}",
            (cold.v.matrix() - warm.v.matrix()).norm()
        );
    }

    // Large gamma drives the shrinkage into its dead zone where the
    // constraint residual is locally flat in Lambda; the full-step fallback
    // must still escape.
    #[test]
    fn heavy_shrinkage_still_converges() {
        let (x, g) = random_instance(5, 2, 0.1, 50.0, 14);
        let spec = SubproblemSpec::new(&x, &g, 0.1, 50.0).unwrap();
        let sol = solve_tangent_prox(&spec, 1e-9, 5000, None).unwrap();
        // the minimizer must still satisfy the descent inequality
        let h0 = subproblem_value(&spec, &DMatrix::zeros(5, 2));
        let h1 = subproblem_value(&spec, sol.v.matrix());
        assert!(h0 - h1 >= sol.v.norm().powi(2) / (2.0 * spec.mu) - 1e-8);
    }

    #[test]
    fn solver_reports_nonconvergence() {
        let (x, g) = random_instance(6, 2, 0.2, 0.3, 15);
        let spec = SubproblemSpec::new(&x, &g, 0.2, 0.3).unwrap();
        let err = solve_tangent_prox(&spec, 1e-12, 1, None).unwrap_err();
        match err {
            DroPcaError::SubproblemStalled { residual, .. } => assert!(residual > 0.0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn spec_validation() {
        let x = random_stiefel(4, 2, 16).unwrap();
        let g = DMatrix::zeros(4, 2);
        assert!(SubproblemSpec::new(&x, &g, 0.0, 0.0).is_err());
        assert!(SubproblemSpec::new(&x, &g, 0.1, -1.0).is_err());
        let wrong = DMatrix::zeros(3, 2);
        assert!(SubproblemSpec::new(&x, &wrong, 0.1, 0.0).is_err());
        let _ = DVector::<f64>::zeros(1);
    }
}
