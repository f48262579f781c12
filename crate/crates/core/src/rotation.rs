//! SO(3) algebra: the scaled geodesic metric, exponential and logarithm maps,
//! projection onto the manifold, and random sampling.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Orthogonality / determinant tolerance accepted by [`Rotation::from_matrix`].
pub const ROTATION_TOL: f64 = 1e-10;

/// Rotation angles at or beyond `PI - LOG_BRANCH_TOL` are reported as ambiguous by
/// [`Rotation::log_flagged`].
pub const LOG_BRANCH_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotationError {
    #[error("matrix is not a rotation (orthogonality defect {ortho:.3e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("cannot project a matrix of rank <= 1 onto SO(3) (singular values {0:?})")]
    DegenerateProjection([f64; 3]),
}

/// A 3x3 special orthogonal matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

/// Axis-angle coordinates of an element of so(3), in radians.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TangentVector(pub Vector3<f64>);

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation({:?})", self.0.as_slice())
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking `mᵀm = I` and `det m = 1` to [`ROTATION_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, RotationError> {
        Self::from_matrix_tol(m, ROTATION_TOL)
    }

    pub fn from_matrix_tol(m: Matrix3<f64>, tol: f64) -> Result<Self, RotationError> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if ortho > tol || (det - 1.0).abs() > tol {
            return Err(RotationError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without validation. The caller guarantees membership in SO(3).
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Rotation by `angle` radians about the (not necessarily unit) `axis`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        TangentVector(axis * (angle / n)).exp()
    }

    pub fn about_z(angle: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), angle)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: &[f64; 9]) -> Matrix3<f64> {
        Matrix3::from_row_slice(v)
    }

    /// Rotation angle in `[0, π]`.
    ///
    /// Uses `atan2` of the skew and trace parts instead of `acos` of the trace
    /// so that angles near zero keep full relative precision.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let skew = Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        );
        let sin = 0.5 * skew.norm();
        let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        sin.atan2(cos)
    }

    /// Bi-invariant distance `angle(a bᵀ) / π`, in `[0, 1]`.
    pub fn angular_distance(&self, other: &Rotation) -> f64 {
        if self.0 == other.0 {
            return 0.0;
        }
        Rotation(self.0 * other.0.transpose()).angle() / PI
    }

    /// Principal logarithm. At angle π the preimage is ambiguous; see
    /// [`Rotation::log_flagged`].
    pub fn log(&self) -> TangentVector {
        self.log_flagged().0
    }

    /// Principal logarithm plus a flag set when the angle is within
    /// [`LOG_BRANCH_TOL`] of π. At exactly π the axis sign is fixed so that its
    /// largest-magnitude component is positive.
    pub fn log_flagged(&self) -> (TangentVector, bool) {
        let m = &self.0;
        let skew = Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        ) * 0.5;
        let theta = self.angle();
        let ambiguous = theta >= PI - LOG_BRANCH_TOL;
        if theta < 1e-4 {
            // θ / sin θ = 1 + θ²/6 + 7θ⁴/360
            let t2 = theta * theta;
            let scale = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
            return (TangentVector(skew * scale), ambiguous);
        }
        let cos = theta.cos();
        if cos > -0.5 {
            return (TangentVector(skew * (theta / theta.sin())), ambiguous);
        }
        // Near π: recover the axis from the symmetric part, (R + Rᵀ)/2 - cos I = (1 - cos) a aᵀ.
        let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos;
        let mut best = 0;
        for i in 1..3 {
            if sym[(i, i)] > sym[(best, best)] {
                best = i;
            }
        }
        let col: Vector3<f64> = sym.column(best).into();
        let mut axis = col / col.norm();
        let s = axis.dot(&skew);
        let flip = if ambiguous {
            largest_component(&axis) < 0.0
        } else {
            s < 0.0
        };
        if flip {
            axis = -axis;
        }
        (TangentVector(axis * theta), ambiguous)
    }
}

fn largest_component(v: &Vector3<f64>) -> f64 {
    let mut best = v[0];
    for &x in v.iter().skip(1) {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    best
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rotation> for &'a Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &'a Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl TangentVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// The skew-symmetric matrix `[v]×`.
    pub fn hat(&self) -> Matrix3<f64> {
        let v = &self.0;
        Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
    }

    /// Rodrigues' formula.
    pub fn exp(&self) -> Rotation {
        let theta = self.0.norm();
        let k = self.hat();
        let k2 = k * k;
        let (a, b) = if theta < 1e-4 {
            let t2 = theta * theta;
            (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        Rotation(Matrix3::identity() + k * a + k2 * b)
    }
}

/// Nearest rotation to `m` in Frobenius norm: `U diag(1, 1, det(UVᵀ)) Vᵀ`.
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation, RotationError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(RotationError::NonFinite);
    }
    let svd = m.svd(true, true);
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let largest = sv[order[0]];
    if largest == 0.0 || sv[order[1]] <= largest * 1e-12 {
        return Err(RotationError::DegenerateProjection([sv[0], sv[1], sv[2]]));
    }
    let mut u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    if (u * v_t).determinant() < 0.0 {
        let k = order[2];
        u.column_mut(k).neg_mut();
    }
    Ok(Rotation(u * v_t))
}

/// Haar-distributed rotation from a normalized Gaussian quaternion.
pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-12 {
            let uq = UnitQuaternion::from_quaternion(q);
            return Rotation(uq.to_rotation_matrix().into_inner());
        }
    }
}

/// `project_to_so3(r + σW)` with `W` a matrix of i.i.d. standard normals.
pub fn wigner_perturb<R: Rng + ?Sized>(r: &Rotation, sigma: f64, rng: &mut R) -> Rotation {
    if sigma == 0.0 {
        return *r;
    }
    loop {
        let w = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(p) = project_to_so3(&(r.0 + w * sigma)) {
            return p;
        }
    }
}
