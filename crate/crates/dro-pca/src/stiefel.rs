//! Primitives for the Stiefel manifold of d×r orthonormal frames.
//!
//! A point is a matrix `X` with `X'X = I_r`; the tangent space at `X` is
//! `{V : X'V + V'X = 0}`. Everything here is a pure function over immutable
//! values, so all operations are safe to call concurrently.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DroPcaError, Result};

/// Feasibility below this is accepted as-is.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Feasibility above [`FEASIBILITY_TOL`] but below this is repaired by a polar
/// re-orthonormalization; anything worse is rejected.
pub const REPAIR_LIMIT: f64 = 1e-6;

/// An orthonormal d×r frame (r < d), validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    entries: DMatrix<f64>,
}

impl StiefelPoint {
    /// Wraps a matrix as a manifold point. Frames with `||X'X - I||_F` up to
    /// 1e-6 are re-orthonormalized (polar factor); worse violations are an
    /// error, as are non-finite entries or shapes with r >= d.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (d, r) = entries.shape();
        if r == 0 || r >= d {
            return Err(DroPcaError::InvalidParameter(format!(
                "Stiefel frame requires 1 <= r < d, got d={d}, r={r}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(DroPcaError::InvalidParameter(
                "Stiefel frame has non-finite entries".into(),
            ));
        }
        let err = feasibility_error(&entries);
        if err <= FEASIBILITY_TOL {
            Ok(Self { entries })
        } else if err <= REPAIR_LIMIT {
            Ok(Self {
                entries: polar_factor(&entries),
            })
        } else {
            Err(DroPcaError::NotOnManifold { feasibility: err })
        }
    }

    /// Internal constructor for matrices produced by an orthonormalizing
    /// factorization.
    pub(crate) fn from_orthonormal(entries: DMatrix<f64>) -> Self {
        debug_assert!(feasibility_error(&entries) <= FEASIBILITY_TOL);
        Self { entries }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn r(&self) -> usize {
        self.entries.ncols()
    }

    /// `||X'X - I_r||_F` for this frame.
    pub fn feasibility(&self) -> f64 {
        feasibility_error(&self.entries)
    }

    /// Snaps the frame back onto the manifold through its polar factor.
    pub fn reorthonormalize(&self) -> StiefelPoint {
        StiefelPoint::from_orthonormal(polar_factor(&self.entries))
    }
}

/// A matrix tangent at a specific frame: `X'V + V'X = 0`.
#[derive(Debug, Clone)]
pub struct TangentVector {
    entries: DMatrix<f64>,
    base: StiefelPoint,
}

impl TangentVector {
    /// Validates tangency to within `1e-8 * (1 + ||V||_F)`.
    pub fn new(base: &StiefelPoint, entries: DMatrix<f64>) -> Result<Self> {
        check_shape(base, &entries)?;
        let violation = tangency_error(base.matrix(), &entries);
        if violation <= 1e-8 * (1.0 + entries.norm()) {
            Ok(Self {
                entries,
                base: base.clone(),
            })
        } else {
            Err(DroPcaError::NotTangent { violation })
        }
    }

    pub(crate) fn from_projected(base: &StiefelPoint, entries: DMatrix<f64>) -> Self {
        debug_assert!(tangency_error(base.matrix(), &entries) <= 1e-8 * (1.0 + entries.norm()));
        Self {
            entries,
            base: base.clone(),
        }
    }

    pub fn zero(base: &StiefelPoint) -> Self {
        Self {
            entries: DMatrix::zeros(base.d(), base.r()),
            base: base.clone(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Scaling preserves tangency.
    pub fn scale(&self, factor: f64) -> TangentVector {
        Self {
            entries: &self.entries * factor,
            base: self.base.clone(),
        }
    }
}

/// Retraction choices for mapping tangent steps back onto the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Retraction {
    #[default]
    Polar,
    Qr,
}

impl Retraction {
    pub fn apply(self, x: &StiefelPoint, v: &TangentVector) -> StiefelPoint {
        match self {
            Retraction::Polar => retract_polar(x, v),
            Retraction::Qr => retract_qr(x, v),
        }
    }
}

/// Orthogonal projection of `A` onto the tangent space at `X`:
/// `A - X (X'A + A'X)/2`. Idempotent and self-adjoint.
pub fn project_tangent(x: &StiefelPoint, ambient: &DMatrix<f64>) -> Result<TangentVector> {
    check_shape(x, ambient)?;
    let xm = x.matrix();
    let s = sym(&(xm.transpose() * ambient));
    Ok(TangentVector::from_projected(x, ambient - xm * s))
}

/// Polar retraction: the orthonormal factor of `X + V`. Well-defined for any
/// tangent `V` since `(X+V)'(X+V) = I + V'V` has full rank.
pub fn retract_polar(x: &StiefelPoint, v: &TangentVector) -> StiefelPoint {
    debug_assert_eq!(x.matrix().shape(), v.matrix().shape());
    let stepped = x.matrix() + v.matrix();
    // a step that does not move the frame retracts to the frame itself;
    // skipping the factorization keeps that exact
    if stepped == *x.matrix() {
        return x.clone();
    }
    StiefelPoint::from_orthonormal(polar_factor(&stepped))
}

/// QR retraction: the Q factor of `X + V`, with the sign convention that R
/// has a nonnegative diagonal.
pub fn retract_qr(x: &StiefelPoint, v: &TangentVector) -> StiefelPoint {
    debug_assert_eq!(x.matrix().shape(), v.matrix().shape());
    let stepped = x.matrix() + v.matrix();
    if stepped == *x.matrix() {
        return x.clone();
    }
    StiefelPoint::from_orthonormal(qr_factor(&stepped))
}

/// Seeded random frame: ChaCha8-driven Gaussian matrix orthonormalized by QR.
/// Deterministic for a given `(d, r, seed)`.
pub fn random_stiefel(d: usize, r: usize, seed: u64) -> Result<StiefelPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_stiefel_from_rng(d, r, &mut rng)
}

/// As [`random_stiefel`] but drawing from a caller-provided stream.
pub fn random_stiefel_from_rng<R: Rng + ?Sized>(
    d: usize,
    r: usize,
    rng: &mut R,
) -> Result<StiefelPoint> {
    if r == 0 || r >= d {
        return Err(DroPcaError::InvalidParameter(format!(
            "random Stiefel frame requires 1 <= r < d, got d={d}, r={r}"
        )));
    }
    let g = gaussian_matrix(d, r, rng);
    Ok(StiefelPoint::from_orthonormal(qr_factor(&g)))
}

/// `||M'M - I||_F`, the orthonormality defect of an arbitrary matrix.
pub fn feasibility_error(m: &DMatrix<f64>) -> f64 {
    let r = m.ncols();
    (m.transpose() * m - DMatrix::identity(r, r)).norm()
}

/// Principal angles (radians, nondecreasing) between the column spans of two
/// frames: arccos of the singular values of `X'Y`, clamped into [0, 1] to
/// absorb rounding.
pub fn principal_angles(x: &StiefelPoint, y: &StiefelPoint) -> Result<Vec<f64>> {
    if x.matrix().shape() != y.matrix().shape() {
        return Err(DroPcaError::ShapeMismatch {
            expected: format!("{}x{}", x.d(), x.r()),
            actual: format!("{}x{}", y.d(), y.r()),
        });
    }
    let m = x.matrix().transpose() * y.matrix();
    let svd = m.svd(false, false);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
    Ok(angles)
}

pub(crate) fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn tangency_error(x: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let xv = x.transpose() * v;
    (&xv + xv.transpose()).norm()
}

/// Orthonormal polar factor `U W'` from the thin SVD `M = U S W'`.
pub(crate) fn polar_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("thin SVD with u requested");
    let v_t = svd.v_t.expect("thin SVD with v_t requested");
    u * v_t
}

/// Thin Q factor with nonnegative diagonal of R.
pub(crate) fn qr_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Matrix of independent standard normal draws from the given stream.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn check_shape(x: &StiefelPoint, m: &DMatrix<f64>) -> Result<()> {
    if x.matrix().shape() != m.shape() {
        return Err(DroPcaError::ShapeMismatch {
            expected: format!("{}x{}", x.d(), x.r()),
            actual: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}
