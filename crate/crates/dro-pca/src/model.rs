//! Problem data and objective pieces for Wasserstein-robust sparse PCA.
//!
//! For a nominal covariance `Sigma`, radius `rho`, and sparsity weight
//! `gamma`, the objective on the manifold splits as `f = u + s + w` with
//!
//! ```text
//! u(X) = q(X) = tr(Sigma) - tr(X' Sigma X)      (residual trace)
//! s(X) = gamma * ||X||_1
//! w(X) = 2 * rho * sqrt(q(X))
//! ```
//!
//! and the worst-case value itself is `phi(X) = (sqrt(q) + rho)^2`. The
//! nonsmooth `w` gets a parametric surrogate `w~(X, mu)` that agrees with `w`
//! when `w >= mu*rho` and switches to the quadratic `w^2/(2 mu rho) + mu rho/2`
//! below; both branches and their gradients only need `Sigma*X`, never a
//! matrix square root of `Sigma`.
//!
//! All gradients use the trace form of `q`, which is smooth in the ambient
//! space and agrees with the Frobenius form on the manifold, so Riemannian
//! gradients are tangent projections of the ambient ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{DroPcaError, Result};
use crate::stiefel::{project_tangent, StiefelPoint, TangentVector};

/// Immutable problem instance. `sigma` is symmetrized on construction and its
/// spectrum is clamped at zero; eigenvalues below -1e-6 are rejected.
#[derive(Debug, Clone)]
pub struct DroPcaProblem {
    sigma: DMatrix<f64>,
    rho: f64,
    gamma: f64,
    r: usize,
    trace_sigma: f64,
}

impl DroPcaProblem {
    pub fn new(sigma: DMatrix<f64>, rho: f64, gamma: f64, r: usize) -> Result<Self> {
        let d = sigma.nrows();
        if sigma.ncols() != d || d == 0 {
            return Err(DroPcaError::ShapeMismatch {
                expected: "square covariance".into(),
                actual: format!("{}x{}", sigma.nrows(), sigma.ncols()),
            });
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(DroPcaError::InvalidParameter(
                "covariance has non-finite entries".into(),
            ));
        }
        if !(r >= 1 && r < d) {
            return Err(DroPcaError::InvalidParameter(format!(
                "rank must satisfy 1 <= r < d, got r={r}, d={d}"
            )));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(DroPcaError::InvalidParameter(format!(
                "radius rho must be finite and nonnegative, got {rho}"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(DroPcaError::InvalidParameter(format!(
                "sparsity weight gamma must be finite and nonnegative, got {gamma}"
            )));
        }
        let sym = crate::stiefel::sym(&sigma);
        // Cheap PSD certificate first; eigen-clamp only when it fails.
        let shifted = &sym + DMatrix::identity(d, d) * 1e-10;
        let sigma = if shifted.cholesky().is_some() {
            sym
        } else {
            let eig = SymmetricEigen::new(sym);
            let min_eig = eig.eigenvalues.min();
            if min_eig < -1e-6 {
                return Err(DroPcaError::IndefiniteCovariance {
                    min_eigenvalue: min_eig,
                });
            }
            let clamped = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&l| l.max(0.0)));
            &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
        };
        let trace_sigma = sigma.trace();
        Ok(Self {
            sigma,
            rho,
            gamma,
            r,
            trace_sigma,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn d(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn trace_sigma(&self) -> f64 {
        self.trace_sigma
    }

    /// Same data with a different radius (used for evaluation problems).
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(DroPcaError::InvalidParameter(format!(
                "radius rho must be finite and nonnegative, got {rho}"
            )));
        }
        let mut p = self.clone();
        p.rho = rho;
        Ok(p)
    }

    fn check_point(&self, x: &StiefelPoint) -> Result<()> {
        if x.d() != self.d() || x.r() != self.r {
            return Err(DroPcaError::ShapeMismatch {
                expected: format!("{}x{}", self.d(), self.r),
                actual: format!("{}x{}", x.d(), x.r()),
            });
        }
        Ok(())
    }
}

/// The objective split into its pieces; `f = u + s + w` exactly as computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    /// Residual trace `q(X) >= 0`.
    pub q: f64,
    /// Smooth part `u = q`.
    pub u: f64,
    /// Robustness part `w = 2 rho sqrt(q)`.
    pub w: f64,
    /// Sparsity part `s = gamma ||X||_1`.
    pub s: f64,
    /// Total `u + s + w`.
    pub f: f64,
}

/// `q(X) = tr(Sigma) - tr(X' Sigma X)`, clamped at zero (rounding can push it
/// a hair below zero when the frame spans the full support of `Sigma`).
pub fn residual_trace(problem: &DroPcaProblem, x: &StiefelPoint) -> f64 {
    let cache = state_cache(problem, x.matrix());
    cache.q
}

pub fn eval_objective(problem: &DroPcaProblem, x: &StiefelPoint) -> ObjectiveBreakdown {
    let cache = state_cache(problem, x.matrix());
    breakdown_from_cache(problem, &cache)
}

/// Closed-form worst-case value `phi(X) = (sqrt(q) + rho)^2`.
pub fn phi_closed_form(problem: &DroPcaProblem, x: &StiefelPoint) -> f64 {
    let q = residual_trace(problem, x);
    let root = q.sqrt() + problem.rho;
    root * root
}

/// Riemannian gradient of `u`: the tangent projection of `-2 Sigma X`,
/// i.e. `-2 (I - XX') Sigma X`.
pub fn grad_u(problem: &DroPcaProblem, x: &StiefelPoint) -> Result<TangentVector> {
    problem.check_point(x)?;
    let sx = &problem.sigma * x.matrix();
    project_tangent(x, &(sx * -2.0))
}

/// Value and Riemannian gradient of the smoothed robustness term.
///
/// With `w = 2 rho sqrt(q)`, the surrogate is `w` itself when `4q >= mu^2`
/// (equivalent to `w >= mu rho`) and `w^2/(2 mu rho) + mu rho / 2` otherwise.
/// Gradients: `-(2 rho / sqrt(q)) (I - XX') Sigma X` on the first branch and
/// `-(4 rho / mu) (I - XX') Sigma X` on the second. When `rho = 0` the term
/// vanishes identically and `mu` is ignored.
pub fn smoothed_w(
    problem: &DroPcaProblem,
    x: &StiefelPoint,
    mu: f64,
) -> Result<(f64, TangentVector)> {
    problem.check_point(x)?;
    if problem.rho == 0.0 {
        return Ok((0.0, TangentVector::zero(x)));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(DroPcaError::InvalidParameter(format!(
            "smoothing parameter must be positive when rho > 0, got {mu}"
        )));
    }
    let cache = state_cache(problem, x.matrix());
    let eval = smooth_eval(problem, &cache, mu);
    let coeff = eval.w_grad_coeff;
    let grad = project_tangent(x, &(&cache.sx * coeff))?;
    Ok((eval.w_smooth, grad))
}

/// `||X||_1`, the entrywise absolute sum.
pub fn l1_value(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Entrywise shrinkage `sign(a) * max(|a| - t, 0)`, the proximal map of
/// `t ||.||_1`.
pub fn soft_threshold(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(DroPcaError::InvalidParameter(format!(
            "shrinkage threshold must be nonnegative, got {t}"
        )));
    }
    Ok(m.map(|a| a.signum() * (a.abs() - t).max(0.0)))
}

/// A Riemannian subgradient of `f`, selecting `sign(0) = 0` for the l1 term
/// and the zero element for `w` at points with `q <= 1e-12` (where `w`
/// attains its global minimum).
pub fn riemannian_subgradient(problem: &DroPcaProblem, x: &StiefelPoint) -> Result<TangentVector> {
    problem.check_point(x)?;
    let cache = state_cache(problem, x.matrix());
    Ok(subgradient_from_cache(problem, x, &cache))
}

pub(crate) fn subgradient_from_cache(
    problem: &DroPcaProblem,
    x: &StiefelPoint,
    cache: &StateCache,
) -> TangentVector {
    let w_coeff = if problem.rho > 0.0 && cache.q > 1e-12 {
        -2.0 * problem.rho / cache.q.sqrt()
    } else {
        0.0
    };
    let mut ambient = &cache.sx * (-2.0 + w_coeff);
    if problem.gamma > 0.0 {
        let sign = x.matrix().map(|v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        ambient += sign * problem.gamma;
    }
    project_tangent(x, &ambient).expect("shapes agree by construction")
}

/// Stationarity certificate `||V||_F / mu` carried by a terminating run.
pub fn stationarity_residual(v: &TangentVector, mu: f64) -> f64 {
    assert!(mu > 0.0, "stationarity residual needs mu > 0");
    v.norm() / mu
}

/// Objective of the robust model at evaluation radius `problem.rho()`:
/// `q + 2 rho sqrt(q) + gamma ||X||_1`.
pub fn worst_case_metric(problem: &DroPcaProblem, x: &StiefelPoint) -> f64 {
    let cache = state_cache(problem, x.matrix());
    cache.q + 2.0 * problem.rho * cache.q.sqrt() + problem.gamma * cache.l1
}

/// Reconstruction loss under a reference covariance plus the sparsity
/// penalty: `q_ref(X) + gamma ||X||_1`.
pub fn out_of_sample_metric(reference_cov: &DMatrix<f64>, gamma: f64, x: &StiefelPoint) -> f64 {
    let sx = reference_cov * x.matrix();
    let q = (reference_cov.trace() - x.matrix().dot(&sx)).max(0.0);
    q + gamma * l1_value(x.matrix())
}

/// Top-`r` eigenvectors of a symmetric matrix as a Stiefel frame, ordered by
/// decreasing eigenvalue. The standard initial point for solvers.
pub fn leading_eigenvectors(sigma: &DMatrix<f64>, r: usize) -> Result<StiefelPoint> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(DroPcaError::ShapeMismatch {
            expected: "square matrix".into(),
            actual: format!("{}x{}", sigma.nrows(), sigma.ncols()),
        });
    }
    if !(r >= 1 && r < d) {
        return Err(DroPcaError::InvalidParameter(format!(
            "rank must satisfy 1 <= r < d, got r={r}, d={d}"
        )));
    }
    let eig = SymmetricEigen::new(crate::stiefel::sym(sigma));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let mut frame = DMatrix::zeros(d, r);
    for (j, &idx) in order.iter().take(r).enumerate() {
        frame.set_column(j, &eig.eigenvectors.column(idx));
    }
    StiefelPoint::new(frame)
}

/// Only the quadratic Wasserstein order is supported: the worst case is
/// infinite for any order in [1, 2).
pub fn validate_wasserstein_order(p: f64) -> Result<()> {
    if (p - 2.0).abs() <= 1e-12 {
        Ok(())
    } else if (1.0..2.0).contains(&p) {
        Err(DroPcaError::InvalidParameter(format!(
            "Wasserstein order p={p} makes the worst-case value infinite; only p=2 is supported"
        )))
    } else {
        Err(DroPcaError::InvalidParameter(format!(
            "unsupported Wasserstein order p={p}; only p=2 is supported"
        )))
    }
}

/// Quantities at a point that every objective/gradient evaluation reuses.
#[derive(Debug, Clone)]
pub(crate) struct StateCache {
    pub sx: DMatrix<f64>,
    pub q: f64,
    pub l1: f64,
}

pub(crate) fn state_cache(problem: &DroPcaProblem, x: &DMatrix<f64>) -> StateCache {
    let sx = &problem.sigma * x;
    let q = (problem.trace_sigma - x.dot(&sx)).max(0.0);
    StateCache {
        sx,
        q,
        l1: l1_value(x),
    }
}

/// mu-dependent values derived from a [`StateCache`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoothEval {
    pub w_smooth: f64,
    pub f_smooth: f64,
    /// Ambient gradient of `u + w~` is `grad_coeff * Sigma X`.
    pub grad_coeff: f64,
    /// Ambient gradient of `w~` alone is `w_grad_coeff * Sigma X`.
    pub w_grad_coeff: f64,
}

pub(crate) fn smooth_eval(problem: &DroPcaProblem, cache: &StateCache, mu: f64) -> SmoothEval {
    let rho = problem.rho;
    let s = problem.gamma * cache.l1;
    let w = 2.0 * rho * cache.q.sqrt();
    let (w_smooth, w_grad_coeff) = if rho == 0.0 {
        (0.0, 0.0)
    } else {
        debug_assert!(mu > 0.0);
        // branch test via 4q vs mu^2 avoids sqrt(q) near zero
        if 4.0 * cache.q >= mu * mu {
            (w, -2.0 * rho / cache.q.sqrt())
        } else {
            (w * w / (2.0 * mu * rho) + mu * rho / 2.0, -4.0 * rho / mu)
        }
    };
    SmoothEval {
        w_smooth,
        f_smooth: cache.q + s + w_smooth,
        grad_coeff: -2.0 + w_grad_coeff,
        w_grad_coeff,
    }
}

pub(crate) fn breakdown_from_cache(
    problem: &DroPcaProblem,
    cache: &StateCache,
) -> ObjectiveBreakdown {
    let u = cache.q;
    let w = 2.0 * problem.rho * cache.q.sqrt();
    let s = problem.gamma * cache.l1;
    ObjectiveBreakdown {
        q: cache.q,
        u,
        w,
        s,
        f: u + s + w,
    }
}
