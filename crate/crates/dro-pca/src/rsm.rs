//! Riemannian subgradient baseline with diminishing stepsize `c / sqrt(k)`.
//!
//! Subgradient methods are not descent methods, so the best objective value
//! seen along the run is tracked and the corresponding iterate returned.
//! Trace rows reuse [`IterateRecord`] with baseline semantics: `v_norm` is
//! the subgradient norm, `alpha` the stepsize taken, `mu` pinned to zero,
//! and no certificate is produced.

use crate::error::{DroPcaError, Result};
use crate::model::{breakdown_from_cache, state_cache, subgradient_from_cache, DroPcaProblem};
use crate::smpg::{IterateRecord, SolveResult, SolveStatus};
use crate::stiefel::{Retraction, StiefelPoint};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RsmConfig {
    /// Stepsize numerator: iteration `k` (1-based) uses `step_c / sqrt(k)`.
    pub step_c: f64,
    pub max_iter: usize,
    pub retraction: Retraction,
}

impl Default for RsmConfig {
    fn default() -> Self {
        Self {
            step_c: 5.0,
            max_iter: 3000,
            retraction: Retraction::Polar,
        }
    }
}

impl RsmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_c.is_finite() && self.step_c > 0.0) {
            return Err(DroPcaError::InvalidParameter(format!(
                "step_c must be positive, got {}",
                self.step_c
            )));
        }
        if self.max_iter == 0 {
            return Err(DroPcaError::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn rsm_solve(
    problem: &DroPcaProblem,
    x0: &StiefelPoint,
    config: &RsmConfig,
) -> Result<SolveResult> {
    config.validate()?;
    if x0.d() != problem.d() || x0.r() != problem.r() {
        return Err(DroPcaError::ShapeMismatch {
            expected: format!("{}x{}", problem.d(), problem.r()),
            actual: format!("{}x{}", x0.d(), x0.r()),
        });
    }

    let mut x = x0.clone();
    let mut best_f = f64::INFINITY;
    let mut best_x = x.clone();
    let mut trace = Vec::with_capacity(config.max_iter);

    for k in 0..config.max_iter {
        let mut reorthonormalized = false;
        if x.feasibility() > 1e-9 || (k > 0 && k % 100 == 0) {
            x = x.reorthonormalize();
            reorthonormalized = true;
        }

        let cache = state_cache(problem, x.matrix());
        let breakdown = breakdown_from_cache(problem, &cache);
        if breakdown.f < best_f {
            best_f = breakdown.f;
            best_x = x.clone();
        }

        let direction = subgradient_from_cache(problem, &x, &cache);
        let step = config.step_c / ((k + 1) as f64).sqrt();
        trace.push(IterateRecord {
            k,
            f: breakdown.f,
            f_smoothed: breakdown.f,
            v_norm: direction.norm(),
            mu: 0.0,
            alpha: step,
            backtracks: 0,
            sub_iterations: 0,
            shrink_event: false,
            reorthonormalized,
        });

        x = config.retraction.apply(&x, &direction.scale(-step));
    }

    // the post-loop iterate was never scored
    let cache = state_cache(problem, x.matrix());
    let final_f = breakdown_from_cache(problem, &cache).f;
    if final_f < best_f {
        best_x = x;
    }

    Ok(SolveResult {
        x_final: best_x,
        trace,
        status: SolveStatus::MaxIter,
        certificate: None,
        max_backtracks_observed: 0,
        shrink_events: 0,
    })
}
