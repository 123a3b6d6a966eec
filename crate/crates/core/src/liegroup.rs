//! Rotation and rigid-body pose algebra on SO(3) / SE(3).
//!
//! Rotations are plain 3x3 matrices. The exponential maps use the closed-form
//! Rodrigues expressions with a second-order Taylor fallback for angles below
//! [`SMALL_ANGLE`].

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle the sin/cos ratios switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-10;

/// Tolerance used for the orthogonality / determinant / skew checks.
pub const GROUP_TOL: f64 = 1e-9;

/// Skew-symmetric matrix with `hat3(v) * w == v.cross(w)`.
pub fn hat3(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat3`]. Rejects matrices whose asymmetry exceeds [`GROUP_TOL`].
pub fn vee3(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asymmetry = (m + m.transpose()).abs().max();
    if !(asymmetry <= GROUP_TOL) {
        return Err(Error::NotSkew { asymmetry });
    }
    Ok(Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    ))
}

/// Coefficients (sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3) of the
/// Rodrigues and left-Jacobian series.
fn rodrigues_coeffs(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix after checking `m^T m = I` and `det m = +1`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(orth <= GROUP_TOL) || !((det - 1.0).abs() <= GROUP_TOL) {
            return Err(Error::NotRotation(format!(
                "orthogonality error {orth:e}, det {det}"
            )));
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix without validation. Callers guarantee the invariants.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn project(m: &Matrix3<f64>) -> Result<Self> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::NotRotation("SVD failed".into())),
        };
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::NotRotation("non-finite entries".into()));
        }
        Ok(Rotation(r))
    }

    pub fn about_x(angle: f64) -> Self {
        exp_rotation(&Vector3::x(), angle)
    }

    pub fn about_y(angle: f64) -> Self {
        exp_rotation(&Vector3::y(), angle)
    }

    pub fn about_z(angle: f64) -> Self {
        exp_rotation(&Vector3::z(), angle)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Largest entry of `R^T R - I`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity())
            .abs()
            .max()
    }

    /// Re-projects onto SO(3); a no-op for an exact rotation.
    pub fn orthonormalized(&self) -> Self {
        Rotation::project(&self.0).unwrap_or(*self)
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(&self) -> f64 {
        let c = ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let s = 0.5 * vee_unchecked(&(self.0 - self.0.transpose())).norm();
        s.atan2(c)
    }

    /// Angle of `self^T other`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        (self.inverse() * *other).angle()
    }
}

fn vee_unchecked(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Rotation by angle `|omega| * scale` about `omega / |omega|`.
pub fn exp_rotation(omega: &Vector3<f64>, scale: f64) -> Rotation {
    let phi = omega * scale;
    let theta = phi.norm();
    let (a, b, _) = rodrigues_coeffs(theta);
    let k = hat3(&phi);
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Body-frame strain of a rod cross-section: angular rate `kappa` (rad/mm)
/// and linear rate `q` (stretch/shear, dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainTwist {
    pub kappa: Vector3<f64>,
    pub q: Vector3<f64>,
}

impl StrainTwist {
    pub fn new(kappa: Vector3<f64>, q: Vector3<f64>) -> Self {
        StrainTwist { kappa, q }
    }

    /// Inextensible, unshearable strain: `q = (1, 0, 0)`.
    pub fn bending(kappa: Vector3<f64>) -> Self {
        StrainTwist {
            kappa,
            q: Vector3::x(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.kappa
            .iter()
            .chain(self.q.iter())
            .all(|x| x.is_finite())
    }

    /// The se(3) matrix `[[kappa]x, q; 0, 0]`.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&self.kappa));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.q);
        m
    }
}

impl Mul<f64> for StrainTwist {
    type Output = StrainTwist;
    fn mul(self, rhs: f64) -> StrainTwist {
        StrainTwist::new(self.kappa * rhs, self.q * rhs)
    }
}

/// Closed-form SE(3) exponential `exp(scale * tw)`.
pub fn exp_pose(tw: &StrainTwist, scale: f64) -> Pose {
    let phi = tw.kappa * scale;
    let theta = phi.norm();
    let (a, b, c) = rodrigues_coeffs(theta);
    let k = hat3(&phi);
    let k2 = k * k;
    let r = Matrix3::identity() + k * a + k2 * b;
    let v = Matrix3::identity() + k * b + k2 * c;
    Pose {
        r: Rotation(r),
        p: v * (tw.q * scale),
    }
}

/// Rigid transform; maps body coordinates to the parent frame as `r * x + p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub r: Rotation,
    pub p: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            r: Rotation::identity(),
            p: Vector3::zeros(),
        }
    }

    pub fn new(r: Rotation, p: Vector3<f64>) -> Self {
        Pose { r, p }
    }

    pub fn from_translation(p: Vector3<f64>) -> Self {
        Pose {
            r: Rotation::identity(),
            p,
        }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            r: self.r * other.r,
            p: self.r * other.p + self.p,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.r.inverse();
        Pose {
            r: rt,
            p: -(rt * self.p),
        }
    }

    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r * *x + self.p
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.r.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.p);
        m
    }

    /// Checks the rotation block and the `(0, 0, 0, 1)` last row.
    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Pose> {
        let last = m.fixed_view::<1, 4>(3, 0);
        if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > GROUP_TOL {
            return Err(Error::NotRotation("last row is not (0, 0, 0, 1)".into()));
        }
        let r = Rotation::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Pose {
            r,
            p: m.fixed_view::<3, 1>(0, 3).into_owned(),
        })
    }

    /// First column of the rotation: the rod tangent for `q = (1, 0, 0)`.
    pub fn x_axis(&self) -> Vector3<f64> {
        self.r.matrix().column(0).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.r
            .matrix()
            .iter()
            .chain(self.p.iter())
            .all(|x| x.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// JSON layout: row-major rotation matrix plus translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoseRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.r.matrix();
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[3 * i + j] = m[(i, j)];
            }
        }
        PoseRepr {
            rotation,
            translation: [self.p.x, self.p.y, self.p.z],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Pose, D::Error> {
        let repr = PoseRepr::deserialize(d)?;
        pose_from_parts(&repr.rotation, &repr.translation).map_err(serde::de::Error::custom)
    }
}

/// Hand-typed matrices within this distance of SO(3) are projected onto it.
const LOAD_PROJECT_TOL: f64 = 1e-4;

fn pose_from_parts(rotation: &[f64; 9], translation: &[f64; 3]) -> Result<Pose> {
    if !rotation
        .iter()
        .chain(translation.iter())
        .all(|x| x.is_finite())
    {
        return Err(Error::NotRotation("non-finite pose entries".into()));
    }
    let m = Matrix3::from_row_slice(rotation);
    let r = match Rotation::from_matrix(m) {
        Ok(r) => r,
        Err(_) => {
            let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
            if orth > LOAD_PROJECT_TOL || m.determinant() <= 0.0 {
                return Err(Error::NotRotation(format!(
                    "rotation block is not orthonormal (error {orth:e})"
                )));
            }
            Rotation::project(&m)?
        }
    };
    Ok(Pose::new(r, Vector3::from_row_slice(translation)))
}
