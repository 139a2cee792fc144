//! Wasserstein distributionally robust sparse PCA on the Stiefel manifold.
//!
//! The robust PCA model asks for an orthonormal frame `X` (d×r, r < d) that
//! minimizes the worst-case reconstruction loss over a type-2 Wasserstein ball
//! of radius `rho` around a nominal distribution with covariance `Sigma`, plus
//! an l1 sparsity penalty. The worst case admits a closed form, which turns
//! the min-max model into the deterministic program
//!
//! ```text
//! min over X'X = I   of   q(X) + gamma*||X||_1 + 2*rho*sqrt(q(X)),
//! q(X) = tr((I - XX')Sigma)
//! ```
//!
//! The square-root term is nonsmooth where `q` vanishes, so the solver
//! ([`smpg`]) replaces it with a parametric smooth surrogate and drives the
//! smoothing parameter to zero while taking proximal gradient steps on the
//! tangent space, followed by a retraction back to the manifold.
//!
//! Crate layout:
//!
//! - [`stiefel`]: manifold primitives (projection, retractions, random frames).
//! - [`model`]: problem data, objective pieces, smoothed surrogate, metrics.
//! - [`subproblem`]: tangent-space proximal step via a dual fixed-point scheme.
//! - [`smpg`]: the smoothing manifold proximal gradient solver.
//! - [`rsm`]: Riemannian subgradient baseline.
//! - [`dual`]: independent numeric verification of the closed-form worst case.
//! - [`data`]: sample ingestion, empirical statistics, synthetic generation,
//!   result persistence.
//! - [`verify`]: randomized self-check suites used by the CLI and tests.
//!
//! With the default `parallel` feature, batch helpers in [`parallel`] fan
//! work out over rayon; without it they degrade to sequential loops.
//!
//! # Example
//!
//! ```
//! use dro_pca::data::{empirical_stats, synthetic_gaussian};
//! use dro_pca::model::{eval_objective, leading_eigenvectors, DroPcaProblem};
//! use dro_pca::smpg::{smpg_solve, SmpgConfig};
//!
//! let (samples, _) = synthetic_gaussian(12, 80, 7)?;
//! let stats = empirical_stats(&samples);
//! let problem = DroPcaProblem::new(stats.covariance, 0.5, 0.05, 3)?;
//! let x0 = leading_eigenvectors(problem.sigma(), 3)?;
//! let result = smpg_solve(&problem, &x0, &SmpgConfig::default())?;
//!
//! // the frame stays orthonormal and the robust objective decomposes as
//! // f = q + gamma*||X||_1 + 2*rho*sqrt(q)
//! assert!(result.x_final.feasibility() <= 1e-9);
//! let pieces = eval_objective(&problem, &result.x_final);
//! assert_eq!(pieces.f, pieces.u + pieces.s + pieces.w);
//! # Ok::<(), dro_pca::DroPcaError>(())
//! ```

pub use nalgebra;

pub mod data;
pub mod dual;
pub mod error;
pub mod model;
pub mod parallel;
pub mod rsm;
pub mod smpg;
pub mod stiefel;
pub mod subproblem;
pub mod verify;

pub use error::{DroPcaError, Result};
pub use model::{DroPcaProblem, ObjectiveBreakdown};
pub use smpg::{Certificate, IterateRecord, SmpgConfig, SolveResult, SolveStatus};
pub use stiefel::{Retraction, StiefelPoint, TangentVector};
