//! SO(3), so(3) and S² primitives.
//!
//! Vectors are plain `nalgebra` types. The two constrained objects, unit
//! directions and rotation matrices, are newtypes that check their invariant
//! on construction.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::GeomError;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `| |v| - 1 |` for [`UnitVec3`].
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance on `|RᵀR - I|_F` and `|det R - 1|` for [`Rotation`].
pub const ORTHO_TOL: f64 = 1e-10;
/// Maximum `|S + Sᵀ|_F` accepted by [`vee`].
pub const SKEW_TOL: f64 = 1e-9;

const SMALL_ANGLE: f64 = 1e-6;

pub fn e1() -> Vec3 {
    Vec3::x()
}

pub fn e2() -> Vec3 {
    Vec3::y()
}

pub fn e3() -> Vec3 {
    Vec3::z()
}

/// Skew-symmetric matrix with `hat(v) * w == v × w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Fails when `s` is not skew within [`SKEW_TOL`].
pub fn vee(s: &Mat3) -> Result<Vec3, GeomError> {
    let asym = (s + s.transpose()).norm();
    if asym > SKEW_TOL {
        return Err(GeomError::NotSkew(asym));
    }
    Ok(Vec3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    ))
}

/// `[v.x, v.y]`.
pub fn project_xy(v: &Vec3) -> Vec2 {
    Vec2::new(v.x, v.y)
}

/// `[v.x, v.y, 0]`.
pub fn lift_xy(v: &Vec2) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

/// Rodrigues coefficients `sin θ / θ` and `(1 - cos θ) / θ²`.
pub(crate) fn rodrigues_coeffs(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        let h = (0.5 * theta).sin() / theta;
        (theta.sin() / theta, 2.0 * h * h)
    }
}

/// Matrix exponential of `hat(v)`.
pub fn exp_so3(v: &Vec3) -> Rotation {
    let (a, b) = rodrigues_coeffs(v.norm());
    let k = hat(v);
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// Great-circle angle between two directions, in `[0, π]`.
pub fn geodesic_angle(a: &UnitVec3, b: &UnitVec3) -> f64 {
    a.0.cross(&b.0).norm().atan2(a.0.dot(&b.0))
}

/// A point on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    /// Accepts `v` only if it already has unit norm.
    pub fn new(v: Vec3) -> Result<Self, GeomError> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(GeomError::NotUnit(n));
        }
        Ok(Self(v))
    }

    /// Normalizes `v`. Fails on zero or non-finite input.
    pub fn normalize(v: Vec3) -> Result<Self, GeomError> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(GeomError::NotUnit(n));
        }
        Ok(Self(v / n))
    }

    pub fn e1() -> Self {
        Self(e1())
    }

    pub fn e2() -> Self {
        Self(e2())
    }

    pub fn e3() -> Self {
        Self(e3())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }
}

impl std::ops::Neg for UnitVec3 {
    type Output = UnitVec3;

    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

/// A 3×3 rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Checks orthogonality and orientation within [`ORTHO_TOL`].
    pub fn new(m: Mat3) -> Result<Self, GeomError> {
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if !ortho.is_finite() || ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(GeomError::NotRotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Rotation about `e3` by `angle` radians.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// The minimal rotation taking `e3` to `target`. For `target = -e3` a
    /// half turn about `e1` is used.
    pub fn aligning_e3(target: &UnitVec3) -> Self {
        let z = e3();
        let t = target.as_vec();
        let axis = z.cross(t);
        let s = axis.norm();
        let c = z.dot(t);
        if s < 1e-15 {
            if c > 0.0 {
                return Self::identity();
            }
            return exp_so3(&(std::f64::consts::PI * e1()));
        }
        exp_so3(&(axis / s * s.atan2(c)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Third column, the image of `e3`.
    pub fn third_axis(&self) -> UnitVec3 {
        UnitVec3(self.0.column(2).into_owned())
    }

    /// `RᵀR - I` in Frobenius norm.
    pub fn ortho_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    /// One Newton step of the polar decomposition, `R (3I - RᵀR) / 2`.
    /// Quadratically convergent for the small drift left by a single
    /// integration step.
    pub fn reorthonormalize(&self) -> Rotation {
        let m = self.0;
        let corrected = m * (Mat3::identity() * 3.0 - m.transpose() * m) * 0.5;
        Self(corrected)
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}
