//! Unit vectors on the sphere and the hemisphere parametrizations used by the
//! branch-and-bound search domains.
//!
//! Three 2D charts cover the upper hemisphere `{v : v3 >= 0}`:
//!
//! * the exponential map `d -> [sin|d| d/|d|, cos|d|]`, which never stretches
//!   distances (`angle(v_a, v_b) <= |d_a - d_b|`),
//! * the stereographic projection from the south pole, which maps circles to
//!   circles,
//! * azimuth/elevation spherical coordinates.
//!
//! The rotation domain is an angle-axis cube; [`axis_angle_to_matrix`] turns a
//! point of that cube into a rotation matrix.

use std::ops::Neg;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm below which a raw vector is considered degenerate.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("vector norm {0:e} is too small to normalize")]
    Degenerate(f64),
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("v3 = {0} is below the equator; the hemisphere chart is undefined there")]
    BelowEquator(f64),
    #[error("vector coincides with the projection pole [0, 0, -1]")]
    ProjectionPole,
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec3 {
    /// Normalizes `(x, y, z)`; rejects vectors with norm below [`MIN_NORM`].
    ///
    /// Vectors that are already unit up to rounding are kept bit for bit, so
    /// normalizing twice changes nothing.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let sq = x * x + y * y + z * z;
        if (sq - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { x, y, z });
        }
        let norm = sq.sqrt();
        if norm < MIN_NORM {
            return Err(GeometryError::Degenerate(norm));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self, GeometryError> {
        Self::new(v.x, v.y, v.z)
    }

    /// Wraps components that are already unit length up to rounding.
    pub(crate) fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        debug_assert!(((x * x + y * y + z * z) - 1.0).abs() < 1e-9);
        Self { x, y, z }
    }

    pub fn e1() -> Self {
        Self::new_unchecked(1.0, 0.0, 0.0)
    }

    pub fn e2() -> Self {
        Self::new_unchecked(0.0, 1.0, 0.0)
    }

    /// The north pole `[0, 0, 1]`.
    pub fn e3() -> Self {
        Self::new_unchecked(0.0, 0.0, 1.0)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &UnitVec3) -> Vector3<f64> {
        self.to_vector().cross(&other.to_vector())
    }

    /// Representative of `{v, -v}` in the closed upper hemisphere.
    pub fn upper(self) -> Self {
        if self.z < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;

    fn neg(self) -> UnitVec3 {
        UnitVec3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(v: UnitVec3) -> Self {
        v.to_array()
    }
}

/// A point of the exponential-map plane (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint {
    pub d1: f64,
    pub d2: f64,
}

impl DiskPoint {
    pub fn new(d1: f64, d2: f64) -> Self {
        Self { d1, d2 }
    }

    /// Polar angle of the preimage, `|d|`.
    pub fn theta(&self) -> f64 {
        self.d1.hypot(self.d2)
    }
}

/// A point of the stereographic plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoPoint {
    pub k1: f64,
    pub k2: f64,
}

impl StereoPoint {
    pub fn new(k1: f64, k2: f64) -> Self {
        Self { k1, k2 }
    }
}

/// Azimuth `h1` in `[-pi, pi]` and elevation `h2` in `[0, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphCoord {
    pub azimuth: f64,
    pub elevation: f64,
}

impl SphCoord {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }
}

/// Angle-axis rotation vector: direction is the axis, norm the angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub r: Vector3<f64>,
}

impl AxisAngle {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Self {
        Self {
            r: Vector3::new(r1, r2, r3),
        }
    }

    pub fn angle(&self) -> f64 {
        self.r.norm()
    }
}

/// Angle in `[0, pi]` between two unit vectors, `acos` of the clamped dot.
pub fn angle_between(a: &UnitVec3, b: &UnitVec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Same angle as [`angle_between`], evaluated as `atan2(|a x b|, a . b)`.
///
/// Keeps full relative precision for nearly parallel or antiparallel inputs.
pub fn angle_between_precise(a: &UnitVec3, b: &UnitVec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn exp_to_sphere(d: DiskPoint) -> UnitVec3 {
    let theta = d.theta();
    if theta == 0.0 {
        return UnitVec3::e3();
    }
    let s = theta.sin() / theta;
    // sin(theta) * d_hat with d_hat = d / theta; renormalize away rounding.
    let (x, y, z) = (s * d.d1, s * d.d2, theta.cos());
    let n = (x * x + y * y + z * z).sqrt();
    UnitVec3::new_unchecked(x / n, y / n, z / n)
}

/// Inverse of [`exp_to_sphere`] on the closed upper hemisphere.
///
/// The pole maps to the origin.
pub fn sphere_to_exp(v: &UnitVec3) -> Result<DiskPoint, GeometryError> {
    if v.z() < 0.0 {
        return Err(GeometryError::BelowEquator(v.z()));
    }
    let rho = v.x().hypot(v.y());
    if rho == 0.0 {
        return Ok(DiskPoint::new(0.0, 0.0));
    }
    let theta = rho.atan2(v.z());
    Ok(DiskPoint::new(theta * v.x() / rho, theta * v.y() / rho))
}

pub fn stereo_to_sphere(k: StereoPoint) -> UnitVec3 {
    let r2 = k.k1 * k.k1 + k.k2 * k.k2;
    let denom = 1.0 + r2;
    let (x, y, z) = (2.0 * k.k1 / denom, 2.0 * k.k2 / denom, (1.0 - r2) / denom);
    let n = (x * x + y * y + z * z).sqrt();
    UnitVec3::new_unchecked(x / n, y / n, z / n)
}

/// Projection from the south pole onto the equatorial plane.
pub fn sphere_to_stereo(v: &UnitVec3) -> Result<StereoPoint, GeometryError> {
    let denom = 1.0 + v.z();
    if denom < MIN_NORM {
        return Err(GeometryError::ProjectionPole);
    }
    Ok(StereoPoint::new(v.x() / denom, v.y() / denom))
}

pub fn scs_to_sphere(h: SphCoord) -> UnitVec3 {
    let (se, ce) = h.elevation.sin_cos();
    let (sa, ca) = h.azimuth.sin_cos();
    let (x, y, z) = (ce * ca, ce * sa, se);
    let n = (x * x + y * y + z * z).sqrt();
    UnitVec3::new_unchecked(x / n, y / n, z / n)
}

/// Azimuth/elevation of an upper-hemisphere vector; azimuth is 0 at the pole.
pub fn sphere_to_scs(v: &UnitVec3) -> Result<SphCoord, GeometryError> {
    if v.z() < 0.0 {
        return Err(GeometryError::BelowEquator(v.z()));
    }
    let rho = v.x().hypot(v.y());
    let azimuth = if rho == 0.0 { 0.0 } else { v.y().atan2(v.x()) };
    Ok(SphCoord::new(azimuth, v.z().atan2(rho)))
}

/// Rodrigues formula `I + sin(t) K + (1 - cos(t)) K^2` with `K = [r_hat]x`.
pub fn axis_angle_to_matrix(r: &AxisAngle) -> Matrix3<f64> {
    let angle = r.angle();
    if angle == 0.0 {
        return Matrix3::identity();
    }
    let axis = r.r / angle;
    let k = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// Image of the north pole under the rotation `r`: the third column of `R(r)`.
///
/// Closed form of `axis_angle_to_matrix(r) * e3`.
pub fn rotate_pole(r: &AxisAngle) -> UnitVec3 {
    let angle = r.angle();
    if angle == 0.0 {
        return UnitVec3::e3();
    }
    let a = r.r / angle;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let x = a.x * a.z * t + a.y * s;
    let y = a.y * a.z * t - a.x * s;
    let z = c + a.z * a.z * t;
    let n = (x * x + y * y + z * z).sqrt();
    UnitVec3::new_unchecked(x / n, y / n, z / n)
}
