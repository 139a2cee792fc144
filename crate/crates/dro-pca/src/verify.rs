//! Randomized self-check suites.
//!
//! Each suite draws seeded instances, checks a contract that holds in exact
//! arithmetic, and reports the worst observed violation against a pinned
//! tolerance. The CLI `verify` command runs all of them; the acceptance
//! tests reuse the same functions with their own trial counts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{empirical_stats, psd_projection, SampleSet};
use crate::dual::{dual_numeric_phi, feasible_perturbation_value};
use crate::model::{
    eval_objective, grad_u, phi_closed_form, residual_trace, smoothed_w, DroPcaProblem,
};
use crate::parallel::run_batch;
use crate::stiefel::{
    gaussian_matrix, project_tangent, random_stiefel_from_rng, retract_polar, sym, StiefelPoint,
};
use crate::subproblem::{solve_tangent_prox, subproblem_value, SubproblemSpec};

/// Outcome of one suite: `failures == 0` means pass.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    /// Largest violation observed (0 when every check held with margin).
    pub worst: f64,
    pub tolerance: String,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct TrialTally {
    checks: usize,
    failures: usize,
    worst: f64,
}

fn tally<F>(name: &'static str, trials: usize, tolerance: String, per_trial: F) -> SuiteOutcome
where
    F: Fn(u64) -> TrialTally + Sync + Send,
{
    let results = run_batch((0..trials as u64).collect(), per_trial);
    let mut outcome = SuiteOutcome {
        name,
        trials,
        checks: 0,
        failures: 0,
        worst: 0.0,
        tolerance,
    };
    for t in results {
        outcome.checks += t.checks;
        outcome.failures += t.failures;
        outcome.worst = outcome.worst.max(t.worst);
    }
    outcome
}

fn random_problem(
    rng: &mut ChaCha8Rng,
    max_d: usize,
    rho: f64,
    gamma: f64,
) -> (DroPcaProblem, StiefelPoint) {
    let d = rng.gen_range(3..=max_d);
    let r = rng.gen_range(1..d);
    let g = gaussian_matrix(d, d, rng);
    let sigma = psd_projection(&sym(&g));
    let problem = DroPcaProblem::new(sigma, rho, gamma, r).expect("valid by construction");
    let x = random_stiefel_from_rng(d, r, rng).expect("r < d");
    (problem, x)
}

/// Closed form vs 1-D dual minimization, and monotonicity of the dual value
/// in the radius.
pub fn dual_gap_suite(seed: u64, trials: usize) -> SuiteOutcome {
    tally("dual-gap", trials, "1e-8 relative".into(), move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xD1A1 + i));
        let rho = 0.1 + rng.gen::<f64>() * 4.9;
        let (problem, x) = random_problem(&mut rng, 30, rho, 0.0);
        let q = residual_trace(&problem, &x);
        let phi = phi_closed_form(&problem, &x);
        let eval = dual_numeric_phi(q, rho).expect("rho > 0");

        let mut t = TrialTally {
            checks: 0,
            failures: 0,
            worst: 0.0,
        };
        let gap = (eval.value - phi).abs() / (1.0 + phi.abs());
        t.checks += 1;
        if gap > 1e-8 {
            t.failures += 1;
        }
        t.worst = t.worst.max(gap);

        // larger radius, larger worst case
        let bigger = dual_numeric_phi(q, rho * 1.5).expect("rho > 0");
        t.checks += 1;
        if bigger.value < eval.value - 1e-10 {
            t.failures += 1;
            t.worst = t.worst.max(eval.value - bigger.value);
        }
        t
    })
}

/// Explicit feasible perturbations stay below the closed-form worst case.
pub fn lower_bound_suite(seed: u64, trials: usize, directions: usize) -> SuiteOutcome {
    tally("lower-bound", trials, "1e-10 absolute".into(), move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x10B0 + i));
        let n = rng.gen_range(5..=40);
        let d = rng.gen_range(3..=15);
        let r = rng.gen_range(1..d.min(5));
        let samples = SampleSet::new(gaussian_matrix(n, d, &mut rng)).expect("nonempty");
        let stats = empirical_stats(&samples);
        let rho = rng.gen::<f64>() * 2.0;
        let problem = DroPcaProblem::new(stats.covariance, rho, 0.0, r).expect("psd");
        let x = random_stiefel_from_rng(d, r, &mut rng).expect("r < d");
        let phi = phi_closed_form(&problem, &x);

        let mut t = TrialTally {
            checks: 0,
            failures: 0,
            worst: 0.0,
        };
        for _ in 0..directions {
            let v = DVector::<f64>::from_fn(d, |_, _| rng.sample(rand_distr::StandardNormal));
            let norm = v.norm();
            if norm < 1e-9 {
                continue;
            }
            let dir = v / norm;
            let value =
                feasible_perturbation_value(&samples, &x, rho, &dir).expect("unit direction");
            t.checks += 1;
            let violation = value - phi;
            if violation > 1e-10 {
                t.failures += 1;
            }
            t.worst = t.worst.max(violation.max(0.0));
        }
        t
    })
}

/// Smoothing sandwich `w <= w~ <= w + mu rho / 2` (1e-12) and the gradient
/// norm bound `2 rho sqrt(tr Sigma)`.
pub fn sandwich_suite(seed: u64, trials: usize) -> SuiteOutcome {
    tally("sandwich", trials, "1e-12 absolute".into(), move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5A17 + i));
        let rho = 0.05 + rng.gen::<f64>() * 3.0;
        let (problem, x) = random_problem(&mut rng, 20, rho, 0.0);
        let w = eval_objective(&problem, &x).w;
        let bound = 2.0 * rho * problem.trace_sigma().sqrt();

        let mut t = TrialTally {
            checks: 0,
            failures: 0,
            worst: 0.0,
        };
        let mut mu = 1.0;
        let mut prev_gap = f64::INFINITY;
        for _ in 0..8 {
            let (wt, grad) = smoothed_w(&problem, &x, mu).expect("mu > 0");
            let below = w - wt;
            let above = wt - (w + mu * rho / 2.0);
            let grad_excess = grad.norm() - bound * (1.0 + 1e-12);
            let gap = wt - w;
            let monotone = gap - prev_gap;
            prev_gap = gap;
            for violation in [below, above, grad_excess, monotone] {
                t.checks += 1;
                if violation > 1e-12 {
                    t.failures += 1;
                }
                t.worst = t.worst.max(violation.max(0.0));
            }
            mu *= 0.4;
        }
        t
    })
}

/// Central-difference consistency of the gradients of `u` and of the
/// smoothed term on both branches, away from the branch boundary.
pub fn gradient_fd_suite(seed: u64, trials: usize) -> SuiteOutcome {
    tally("gradient-fd", trials, "1e-5 relative".into(), move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xF0 + i));
        let d = rng.gen_range(4..=14);
        let r = rng.gen_range(1..d.min(4));
        let rho = 0.3 + rng.gen::<f64>() * 2.0;

        let mut t = TrialTally {
            checks: 0,
            failures: 0,
            worst: 0.0,
        };
        let h = 1e-5;
        let check = |analytic: f64, fd: f64, t: &mut TrialTally| {
            let err = (analytic - fd).abs() / (1.0 + fd.abs());
            t.checks += 1;
            if err > 1e-5 {
                t.failures += 1;
            }
            t.worst = t.worst.max(err);
        };

        // generic frame: smooth branch for small enough mu
        let g = gaussian_matrix(d, d, &mut rng);
        let sigma = psd_projection(&sym(&g));
        let problem = DroPcaProblem::new(sigma, rho, 0.0, r).expect("psd");
        let x = random_stiefel_from_rng(d, r, &mut rng).expect("r < d");
        let v = project_tangent(&x, &gaussian_matrix(d, r, &mut rng)).expect("shape");
        let v = v.scale(1.0 / v.norm().max(1e-12));

        // mu chosen with a factor-2 branch margin so the finite-difference
        // probes cannot cross the boundary
        let q = residual_trace(&problem, &x);
        let mu_smooth = (2.0 * q).sqrt().clamp(1e-3, 0.5);
        if 4.0 * q >= mu_smooth * mu_smooth * 1.01 {
            let (_, grad) = smoothed_w(&problem, &x, mu_smooth).expect("mu > 0");
            let fw = smoothed_w(&problem, &retract_polar(&x, &v.scale(h)), mu_smooth)
                .expect("mu > 0")
                .0;
            let bw = smoothed_w(&problem, &retract_polar(&x, &v.scale(-h)), mu_smooth)
                .expect("mu > 0")
                .0;
            check(grad.matrix().dot(v.matrix()), (fw - bw) / (2.0 * h), &mut t);
        }

        let gu = grad_u(&problem, &x).expect("shape");
        let fw = residual_trace(&problem, &retract_polar(&x, &v.scale(h)));
        let bw = residual_trace(&problem, &retract_polar(&x, &v.scale(-h)));
        check(gu.matrix().dot(v.matrix()), (fw - bw) / (2.0 * h), &mut t);

        // engineered spectrum: the frame spans the dominant eigenvectors, so
        // q is the tiny tail and the quadratic branch is active with margin
        let mut eigs: Vec<f64> = (0..d).map(|k| 1.0 + k as f64).collect();
        for e in eigs.iter_mut().skip(r) {
            *e = 1e-6 / (d - r) as f64;
        }
        let qmat = crate::stiefel::qr_factor(&gaussian_matrix(d, d, &mut rng));
        let sigma2 = &qmat * DMatrix::from_diagonal(&DVector::from_vec(eigs)) * qmat.transpose();
        let problem2 = DroPcaProblem::new(sigma2, rho, 0.0, r).expect("psd");
        let x2 = crate::model::leading_eigenvectors(problem2.sigma(), r).expect("r < d");
        let v2 = project_tangent(&x2, &gaussian_matrix(d, r, &mut rng)).expect("shape");
        let v2 = v2.scale(1.0 / v2.norm().max(1e-12));
        let q2 = residual_trace(&problem2, &x2);
        let mu_quad = (4.0 * q2 / 0.99).sqrt().max(1e-4) * 4.0;
        if 4.0 * q2 <= mu_quad * mu_quad * 0.99 {
            let (_, grad) = smoothed_w(&problem2, &x2, mu_quad).expect("mu > 0");
            let fw = smoothed_w(&problem2, &retract_polar(&x2, &v2.scale(h)), mu_quad)
                .expect("mu > 0")
                .0;
            let bw = smoothed_w(&problem2, &retract_polar(&x2, &v2.scale(-h)), mu_quad)
                .expect("mu > 0")
                .0;
            check(
                grad.matrix().dot(v2.matrix()),
                (fw - bw) / (2.0 * h),
                &mut t,
            );
        }
        t
    })
}

/// Subproblem contracts: the closed form at `gamma = 0`, the descent
/// inequality at `alpha in {0.25, 0.5, 1}`, and tangency of the returned
/// direction.
pub fn descent_suite(seed: u64, trials: usize) -> SuiteOutcome {
    tally("descent", trials, "1e-8 absolute".into(), move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xDE5C + i));
        let d = rng.gen_range(3..=20);
        let r = rng.gen_range(1..d.min(5));
        let x = random_stiefel_from_rng(d, r, &mut rng).expect("r < d");
        let g = gaussian_matrix(d, r, &mut rng) * (0.5 + rng.gen::<f64>() * 5.0);
        let mu = 10f64.powf(-(rng.gen::<f64>() * 3.0)) * 0.5;
        let gamma = if i % 3 == 0 {
            0.0
        } else {
            rng.gen::<f64>() * 0.5
        };

        let spec = SubproblemSpec::new(&x, &g, mu, gamma).expect("valid spec");
        let sol = solve_tangent_prox(&spec, 1e-9, 5000, None).expect("solvable");

        let mut t = TrialTally {
            checks: 0,
            failures: 0,
            worst: 0.0,
        };
        if gamma == 0.0 {
            let v_star = project_tangent(&x, &g).expect("shape").scale(-mu);
            let err = (sol.v.matrix() - v_star.matrix()).norm();
            t.checks += 1;
            if err > 1e-10 {
                t.failures += 1;
            }
            t.worst = t.worst.max(err);
        }

        let h0 = subproblem_value(&spec, &DMatrix::zeros(d, r));
        let vn2 = sol.v.norm().powi(2);
        for alpha in [0.25, 0.5, 1.0] {
            let h_alpha = subproblem_value(&spec, &(sol.v.matrix() * alpha));
            let required = alpha * (2.0 - alpha) / (2.0 * mu) * vn2;
            let violation = required - (h0 - h_alpha);
            t.checks += 1;
            if violation > 1e-8 {
                t.failures += 1;
            }
            t.worst = t.worst.max(violation.max(0.0));
        }

        let tangency = crate::stiefel::tangency_error(x.matrix(), sol.v.matrix());
        t.checks += 1;
        if tangency > 1e-12 * (1.0 + sol.v.norm()) {
            t.failures += 1;
            t.worst = t.worst.max(tangency);
        }
        t
    })
}

/// All suites at their default sizes.
pub fn run_all(seed: u64, trials: usize) -> Vec<SuiteOutcome> {
    vec![
        dual_gap_suite(seed, trials),
        lower_bound_suite(seed, trials, 20),
        sandwich_suite(seed, trials),
        gradient_fd_suite(seed, trials),
        descent_suite(seed, trials),
    ]
}
