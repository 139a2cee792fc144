//! Independent verification of the closed-form worst case.
//!
//! Two routes that never touch the closed-form expression's derivation:
//!
//! 1. the worst-case value solves a one-dimensional dual problem in a
//!    multiplier `lambda > 1` once the inner mean is fixed at the nominal
//!    mean; [`dual_numeric_phi`] minimizes it by golden-section search;
//! 2. any explicitly constructed feasible perturbation of an empirical
//!    distribution lower-bounds the worst case;
//!    [`feasible_perturbation_value`] builds one by shifting every atom
//!    along a common direction with variance-spreading signs.

use nalgebra::DVector;

use crate::data::SampleSet;
use crate::error::{DroPcaError, Result};
use crate::stiefel::StiefelPoint;

/// Result of the 1-D dual minimization.
#[derive(Debug, Clone, Copy)]
pub struct DualEval {
    /// Minimizing multiplier; `1 + sqrt(q)/rho` up to the search tolerance.
    pub lambda_star: f64,
    /// Numerically minimized dual value.
    pub value: f64,
    /// `|value - (sqrt(q) + rho)^2|`, the gap to the closed form.
    pub gap: f64,
}

const LAMBDA_TOL: f64 = 1e-12;

/// Minimizes `(lambda-1) rho^2 + q/(lambda-1) + q + rho^2` over `lambda > 1`
/// by golden-section search. For `q = 0` the minimum sits at the boundary
/// and the value is `rho^2`.
pub fn dual_numeric_phi(q: f64, rho: f64) -> Result<DualEval> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(DroPcaError::InvalidParameter(format!(
            "dual evaluation needs rho > 0, got {rho}"
        )));
    }
    if !(q.is_finite() && q >= 0.0) {
        return Err(DroPcaError::InvalidParameter(format!(
            "residual trace must be nonnegative, got {q}"
        )));
    }

    let objective = |lambda: f64| (lambda - 1.0) * rho * rho + q / (lambda - 1.0) + q + rho * rho;

    let mut lo = 1.0 + 1e-13;
    let mut hi = 1.0 + 10.0 * (q.sqrt() / rho).max(1.0);
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut m1 = hi - inv_phi * (hi - lo);
    let mut m2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(m1);
    let mut f2 = objective(m2);
    while hi - lo > LAMBDA_TOL {
        if f1 <= f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - inv_phi * (hi - lo);
            f1 = objective(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + inv_phi * (hi - lo);
            f2 = objective(m2);
        }
    }
    let lambda_star = 0.5 * (lo + hi);
    let value = objective(lambda_star);
    let closed = (q.sqrt() + rho) * (q.sqrt() + rho);
    Ok(DualEval {
        lambda_star,
        value,
        gap: (value - closed).abs(),
    })
}

/// Evaluates the reconstruction loss of a perturbed empirical distribution.
///
/// Each atom moves by `rho * s_i * direction` with
/// `s_i = sign(<(I - XX')(xi_i - mean), direction>)`, which spreads variance
/// along `direction`. The identity coupling certifies that the type-2
/// Wasserstein distance to the original empirical distribution is at most
/// `rho`, so the returned value never exceeds the closed-form worst case.
pub fn feasible_perturbation_value(
    samples: &SampleSet,
    x: &StiefelPoint,
    rho: f64,
    direction: &DVector<f64>,
) -> Result<f64> {
    let (n, d) = (samples.n(), samples.dim());
    if x.d() != d {
        return Err(DroPcaError::ShapeMismatch {
            expected: format!("frame with {d} rows"),
            actual: format!("{}x{}", x.d(), x.r()),
        });
    }
    if direction.len() != d {
        return Err(DroPcaError::ShapeMismatch {
            expected: format!("direction of length {d}"),
            actual: format!("length {}", direction.len()),
        });
    }
    if (direction.norm() - 1.0).abs() > 1e-12 {
        return Err(DroPcaError::InvalidParameter(format!(
            "direction must be a unit vector, got norm {}",
            direction.norm()
        )));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(DroPcaError::InvalidParameter(format!(
            "radius must be nonnegative, got {rho}"
        )));
    }

    let data = samples.data();
    let mean = samples.mean();
    let xm = x.matrix();

    // residual_part(v) = (I - XX') v
    let residual_part = |v: &DVector<f64>| -> DVector<f64> {
        let coords = xm.transpose() * v;
        v - xm * coords
    };

    let mut signs = Vec::with_capacity(n);
    let mut mean_sign = 0.0;
    for i in 0..n {
        let centered = DVector::from_iterator(d, data.row(i).iter().copied()) - &mean;
        let score = residual_part(&centered).dot(direction);
        let s = if score > 0.0 {
            1.0
        } else if score < 0.0 {
            -1.0
        } else {
            0.0
        };
        mean_sign += s;
        signs.push(s);
    }
    mean_sign /= n as f64;

    // perturbed mean shifts by rho * mean(s) * direction
    let new_mean = &mean + direction * (rho * mean_sign);
    let mut total = 0.0;
    for (row, &sign) in data.row_iter().zip(&signs) {
        let atom = DVector::from_iterator(d, row.iter().copied()) + direction * (rho * sign);
        let centered = atom - &new_mean;
        total += residual_part(&centered).norm_squared();
    }
    Ok(total / n as f64)
}

/// Root-mean-square displacement under the index pairing: an upper bound on
/// the type-2 Wasserstein distance between two equally weighted empirical
/// distributions.
pub fn w2_upper_bound_identity_coupling(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.n() != b.n() || a.dim() != b.dim() {
        return Err(DroPcaError::ShapeMismatch {
            expected: format!("{}x{}", a.n(), a.dim()),
            actual: format!("{}x{}", b.n(), b.dim()),
        });
    }
    let diff = a.data() - b.data();
    Ok((diff.norm_squared() / a.n() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{empirical_stats, SampleSet};
    use crate::model::{phi_closed_form, DroPcaProblem};
    use crate::stiefel::{gaussian_matrix, random_stiefel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dual_matches_the_analytic_minimum() {
        let eval = dual_numeric_phi(3.0, 1.0).unwrap();
        let expected = 4.0 + 2.0 * 3.0_f64.sqrt();
        assert!((eval.value - expected).abs() <= 1e-10);
        assert!((eval.lambda_star - (1.0 + 3.0_f64.sqrt())).abs() <= 1e-6);
        assert!(eval.gap <= 1e-10);
    }

    #[test]
    fn dual_boundary_case() {
        let eval = dual_numeric_phi(0.0, 1.0).unwrap();
        assert!((eval.value - 1.0).abs() <= 1e-10);
        assert!(eval.lambda_star - 1.0 <= 1e-10);
        assert!(eval.lambda_star > 1.0);
    }

    #[test]
    fn dual_agrees_with_the_closed_form_on_random_instances() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.gen_range(3..=30);
            let r = rng.gen_range(1..d);
            let g = gaussian_matrix(d, d, &mut rng);
            let sigma = crate::data::psd_projection(&crate::stiefel::sym(&g));
            let rho = 0.1 + rng.gen::<f64>() * 4.9;
            let problem = DroPcaProblem::new(sigma, rho, 0.0, r).unwrap();
            let x = random_stiefel(d, r, seed + 1000).unwrap();
            let q = crate::model::residual_trace(&problem, &x);
            let phi = phi_closed_form(&problem, &x);
            let eval = dual_numeric_phi(q, rho).unwrap();
            assert!(
                (eval.value - phi).abs() <= 1e-8 * (1.0 + phi.abs()),
                "seed {seed}: dual {} vs closed {}",
                eval.value,
                phi
            );
        }
    }

    #[test]
    fn dual_is_monotone_in_rho() {
        let q = 2.7;
        let mut last = 0.0;
        for i in 1..=20 {
            let rho = i as f64 * 0.25;
            let value = dual_numeric_phi(q, rho).unwrap().value;
            assert!(value >= last - 1e-12, "rho={rho}");
            last = value;
        }
    }

    fn random_samples(n: usize, d: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleSet::new(gaussian_matrix(n, d, &mut rng)).unwrap()
    }

    fn unit_direction(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        loop {
            let v = DVector::<f64>::from_fn(d, |_, _| rng.sample(rand_distr::StandardNormal));
            let n = v.norm();
            if n > 1e-8 {
                return v / n;
            }
        }
    }

    #[test]
    fn zero_radius_reproduces_the_empirical_objective() {
        let samples = random_samples(17, 5, 3);
        let stats = empirical_stats(&samples);
        let problem = DroPcaProblem::new(stats.covariance.clone(), 0.0, 0.0, 2).unwrap();
        let x = random_stiefel(5, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dir = unit_direction(5, &mut rng);
        let value = feasible_perturbation_value(&samples, &x, 0.0, &dir).unwrap();
        let q = crate::model::residual_trace(&problem, &x);
        assert!((value - q).abs() <= 1e-10 * (1.0 + q));
    }

    #[test]
    fn perturbations_never_exceed_the_closed_form() {
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(5..40);
            let d = rng.gen_range(3..12);
            let r = rng.gen_range(1..d.min(4));
            let samples = random_samples(n, d, seed + 50);
            let stats = empirical_stats(&samples);
            let rho = rng.gen::<f64>() * 2.0;
            let problem = DroPcaProblem::new(stats.covariance.clone(), rho, 0.0, r).unwrap();
            let x = random_stiefel(d, r, seed + 99).unwrap();
            let phi = phi_closed_form(&problem, &x);
            for _ in 0..20 {
                let dir = unit_direction(d, &mut rng);
                let value = feasible_perturbation_value(&samples, &x, rho, &dir).unwrap();
                assert!(
                    value <= phi + 1e-10,
                    "seed {seed}: perturbation {value} above closed form {phi}"
                );
            }
        }
    }

    #[test]
    fn single_atom_has_zero_centered_loss() {
        let samples = random_samples(1, 4, 7);
        let x = random_stiefel(4, 2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dir = unit_direction(4, &mut rng);
        let value = feasible_perturbation_value(&samples, &x, 1.5, &dir).unwrap();
        assert!(value.abs() <= 1e-12);
    }

    #[test]
    fn non_unit_directions_are_rejected() {
        let samples = random_samples(3, 3, 10);
        let x = random_stiefel(3, 1, 11).unwrap();
        let dir = DVector::from_column_slice(&[2.0, 0.0, 0.0]);
        assert!(feasible_perturbation_value(&samples, &x, 1.0, &dir).is_err());
    }

    #[test]
    fn identity_coupling_bound_basics() {
        let a = random_samples(6, 3, 12);
        assert_eq!(w2_upper_bound_identity_coupling(&a, &a).unwrap(), 0.0);

        let shift = DVector::from_column_slice(&[0.3, -0.4, 1.2]);
        let mut shifted = a.data().clone();
        for i in 0..shifted.nrows() {
            for j in 0..shifted.ncols() {
                shifted[(i, j)] += shift[j];
            }
        }
        let b = SampleSet::new(shifted).unwrap();
        let bound = w2_upper_bound_identity_coupling(&a, &b).unwrap();
        assert!((bound - shift.norm()).abs() <= 1e-12);
    }

    // Exhaustive assignment over n! pairings: the exact W2 between equally
    // weighted empirical distributions. The identity coupling can only
    // overestimate it.
    #[test]
    fn identity_coupling_dominates_exact_assignment() {
        fn exact_w2(a: &SampleSet, b: &SampleSet) -> f64 {
            let n = a.n();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            fn visit(
                perm: &mut Vec<usize>,
                k: usize,
                a: &SampleSet,
                b: &SampleSet,
                best: &mut f64,
            ) {
                let n = perm.len();
                if k == n {
                    let mut total = 0.0;
                    for (i, &p) in perm.iter().enumerate() {
                        let diff = a.data().row(i) - b.data().row(p);
                        total += diff.norm_squared();
                    }
                    *best = best.min(total / n as f64);
                    return;
                }
                for i in k..n {
                    perm.swap(k, i);
                    visit(perm, k + 1, a, b, best);
                    perm.swap(k, i);
                }
            }
            visit(&mut perm, 0, a, b, &mut best);
            best.sqrt()
        }

        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=6);
            let d = rng.gen_range(1..=3);
            let a = random_samples(n, d, seed + 20);
            let b = random_samples(n, d, seed + 200);
            let bound = w2_upper_bound_identity_coupling(&a, &b).unwrap();
            let exact = exact_w2(&a, &b);
            assert!(
                bound >= exact - 1e-12,
                "seed {seed}: bound {bound} below exact {exact}"
            );
        }
    }
}
