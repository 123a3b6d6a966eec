//! Omnidirectional camera model on the unit image sphere.
//!
//! A pixel `uv` maps to sensor coordinates `(u', v') = A uv + c` and then to
//! the ray `(u', v', g(rho))` with `rho = |(u', v')|` and
//! `g(rho) = a0 + a2 rho^2 + a3 rho^3 + a4 rho^4` (no linear term, following
//! the OCamCalib convention). The optical axis is `+z` when `a0 > 0` and `-z`
//! otherwise.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::Pose;

/// Inputs closer than this to the camera center cannot be projected.
pub const MIN_PROJECT_NORM: f64 = 1e-9;

/// Silhouettes with `|t x p_hat|` below this are reported degenerate.
pub const SILHOUETTE_DEGENERACY: f64 = 1e-6;

/// Unit direction on the image sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vector3<f64>);

impl SpherePoint {
    /// Normalizes `x`; rejects points at the camera center.
    pub fn from_vector(x: &Vector3<f64>) -> Result<Self> {
        let n = x.norm();
        if !(n > MIN_PROJECT_NORM) || !n.is_finite() {
            return Err(Error::DegeneratePoint(n));
        }
        Ok(SpherePoint(x / n))
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Angle between two directions in radians.
    pub fn angle_to(&self, other: &SpherePoint) -> f64 {
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

impl Serialize for SpherePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.x, self.0.y, self.0.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpherePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        let v = Vector3::from(v);
        let n = v.norm();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(serde::de::Error::custom(format!(
                "sphere point has norm {n}, expected 1"
            )));
        }
        Ok(SpherePoint(v))
    }
}

/// Observed boundary directions of the cross-section at arclength `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryObservation {
    pub s: f64,
    #[serde(rename = "y_r")]
    pub right: SpherePoint,
    #[serde(rename = "y_l")]
    pub left: SpherePoint,
}

/// Central projection onto the unit sphere.
pub fn project_point(x: &Vector3<f64>) -> Result<SpherePoint> {
    SpherePoint::from_vector(x)
}

/// Left/right boundary directions of a tube cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub left: SpherePoint,
    pub right: SpherePoint,
}

/// Thin-tube silhouette of the cross-section at `pose` (camera frame).
///
/// The boundary points are `p +/- radius * n` with `n = normalize(t x p_hat)`,
/// `t` the cross-section tangent; the `+n` point is "left".
pub fn tube_silhouette(pose: &Pose, radius: f64) -> Result<Silhouette> {
    let p = pose.p;
    let dist = p.norm();
    if !(dist > radius.max(MIN_PROJECT_NORM)) {
        return Err(Error::DegeneratePoint(dist));
    }
    let t = pose.x_axis();
    let cross = t.cross(&(p / dist));
    let c = cross.norm();
    if !(c >= SILHOUETTE_DEGENERACY) {
        return Err(Error::DegenerateSilhouette(c));
    }
    let n = cross / c;
    Ok(Silhouette {
        left: project_point(&(p + n * radius))?,
        right: project_point(&(p - n * radius))?,
    })
}

/// Fitted or calibrated omnidirectional camera.
#[derive(Debug, Clone, PartialEq)]
pub struct OmniCameraModel {
    affine: Matrix2<f64>,
    center: Vector2<f64>,
    /// `(a0, a2, a3, a4)`.
    poly: [f64; 4],
    image_size: (u32, u32),
    fov_deg: f64,
    affine_inv: Matrix2<f64>,
    /// Radius at which the off-axis angle reaches `fov / 2` (or the end of the
    /// monotone range, whichever comes first).
    rho_limit: f64,
}

impl OmniCameraModel {
    pub fn new(
        affine: Matrix2<f64>,
        center: Vector2<f64>,
        poly: [f64; 4],
        image_size: (u32, u32),
        fov_deg: f64,
    ) -> Result<Self> {
        if !affine
            .iter()
            .chain(center.iter())
            .chain(poly.iter())
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidCamera("non-finite coefficients".into()));
        }
        let affine_inv = affine
            .try_inverse()
            .filter(|_| affine.determinant().abs() > 1e-12)
            .ok_or_else(|| Error::InvalidCamera("affine matrix is singular".into()))?;
        if !(fov_deg > 0.0 && fov_deg < 360.0) {
            return Err(Error::InvalidCamera(format!(
                "fov {fov_deg} outside (0, 360)"
            )));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::InvalidCamera("empty image".into()));
        }
        if poly[0] == 0.0 {
            return Err(Error::InvalidCamera(
                "a0 = 0 gives a singular ray at the center".into(),
            ));
        }
        let mut cam = OmniCameraModel {
            affine,
            center,
            poly,
            image_size,
            fov_deg,
            affine_inv,
            rho_limit: 0.0,
        };
        cam.rho_limit = cam.find_rho_limit()?;
        Ok(cam)
    }

    /// Walks outwards from the center until the off-axis angle reaches half
    /// the field of view, checking that it increases strictly on the way.
    fn find_rho_limit(&self) -> Result<f64> {
        let half = self.fov_deg.to_radians() * 0.5;
        let (w, h) = (f64::from(self.image_size.0), f64::from(self.image_size.1));
        let corner_rho = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .iter()
            .map(|&(u, v)| (self.affine * Vector2::new(u, v) + self.center).norm())
            .fold(0.0, f64::max)
            .max(1.0);
        let n = 4096;
        let end = 4.0 * corner_rho;
        let mut prev = self.off_axis_of_rho(0.0);
        for i in 1..=n {
            let rho = end * i as f64 / n as f64;
            let ang = self.off_axis_of_rho(rho);
            if !(ang > prev) {
                if rho <= corner_rho {
                    return Err(Error::InvalidCamera(format!(
                        "projection is not monotone at rho = {rho:.3}"
                    )));
                }
                return Ok(end * (i - 1) as f64 / n as f64);
            }
            if ang >= half {
                return Ok(rho);
            }
            prev = ang;
        }
        Ok(end)
    }

    /// Equidistant-like model with `fov_deg` across the image width, the
    /// distortion center at the image center and unit pixel scale.
    pub fn synthesize(fov_deg: f64, image_size: (u32, u32)) -> Result<Self> {
        if !(fov_deg > 0.0 && fov_deg < 270.0) {
            return Err(Error::InvalidCamera(format!(
                "cannot synthesize fov {fov_deg}"
            )));
        }
        let (w, h) = (f64::from(image_size.0), f64::from(image_size.1));
        let rho_edge = 0.5 * w;
        let focal = rho_edge / (0.5 * fov_deg.to_radians());
        // least-squares fit of g(rho) = rho / tan(rho / focal) on [0, rho_edge]
        // in the normalized variable x = rho / rho_edge
        let samples = 256;
        let mut a = DMatrix::zeros(samples, 4);
        let mut b = DVector::zeros(samples);
        for i in 0..samples {
            let x = i as f64 / (samples - 1) as f64;
            let rho = x * rho_edge;
            let theta = rho / focal;
            b[i] = if theta < 1e-8 {
                focal
            } else {
                rho * theta.cos() / theta.sin()
            };
            a[(i, 0)] = 1.0;
            a[(i, 1)] = x * x;
            a[(i, 2)] = x * x * x;
            a[(i, 3)] = x * x * x * x;
        }
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::InvalidCamera(e.to_string()))?;
        let poly = [
            sol[0],
            sol[1] / rho_edge.powi(2),
            sol[2] / rho_edge.powi(3),
            sol[3] / rho_edge.powi(4),
        ];
        OmniCameraModel::new(
            Matrix2::identity(),
            Vector2::new(-0.5 * w, -0.5 * h),
            poly,
            image_size,
            fov_deg,
        )
    }

    pub fn affine(&self) -> &Matrix2<f64> {
        &self.affine
    }

    pub fn center(&self) -> &Vector2<f64> {
        &self.center
    }

    pub fn poly(&self) -> [f64; 4] {
        self.poly
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn g(&self, rho: f64) -> f64 {
        let [a0, a2, a3, a4] = self.poly;
        let r2 = rho * rho;
        a0 + r2 * (a2 + rho * (a3 + rho * a4))
    }

    fn g_prime(&self, rho: f64) -> f64 {
        let [_, a2, a3, a4] = self.poly;
        rho * (2.0 * a2 + rho * (3.0 * a3 + rho * 4.0 * a4))
    }

    pub fn optical_axis(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.poly[0].signum())
    }

    /// Angle between a ray at sensor radius `rho` and the optical axis.
    fn off_axis_of_rho(&self, rho: f64) -> f64 {
        rho.atan2(self.g(rho) * self.poly[0].signum())
    }

    /// Angle between `d` and the optical axis, radians.
    pub fn off_axis_angle(&self, d: &SpherePoint) -> f64 {
        let v = d.vector();
        let z = v.z * self.poly[0].signum();
        (v.x.hypot(v.y)).atan2(z)
    }

    pub fn in_fov(&self, d: &SpherePoint) -> bool {
        self.off_axis_angle(d) <= 0.5 * self.fov_deg.to_radians()
    }

    pub fn in_image(&self, uv: &Vector2<f64>) -> bool {
        let (w, h) = (f64::from(self.image_size.0), f64::from(self.image_size.1));
        (0.0..=w).contains(&uv.x) && (0.0..=h).contains(&uv.y)
    }

    /// Pixel that maps onto the optical axis.
    pub fn distortion_center(&self) -> Vector2<f64> {
        self.affine_inv * (-self.center)
    }

    pub fn pixel_to_sphere(&self, uv: &Vector2<f64>) -> Result<SpherePoint> {
        if !self.in_image(uv) {
            return Err(Error::UncalibratedPixel);
        }
        let s = self.affine * uv + self.center;
        let rho = s.norm();
        let ray = Vector3::new(s.x, s.y, self.g(rho));
        SpherePoint::from_vector(&ray).map_err(|_| Error::UncalibratedPixel)
    }

    /// Inverse of [`Self::pixel_to_sphere`]: solves `off_axis(rho) = angle(d)`
    /// with bisection-safeguarded Newton iterations.
    pub fn sphere_to_pixel(&self, d: &SpherePoint) -> Result<Vector2<f64>> {
        let target = self.off_axis_angle(d);
        let half = 0.5 * self.fov_deg.to_radians();
        if target > half + 1e-12 || target > self.off_axis_of_rho(self.rho_limit) + 1e-12 {
            return Err(Error::OutsideFov {
                angle_deg: target.to_degrees(),
            });
        }
        let v = d.vector();
        let r = v.x.hypot(v.y);
        if r == 0.0 {
            return Ok(self.distortion_center());
        }
        let rho = self.solve_rho(target);
        let sensor = Vector2::new(v.x, v.y) * (rho / r);
        Ok(self.affine_inv * (sensor - self.center))
    }

    fn solve_rho(&self, target: f64) -> f64 {
        let sign = self.poly[0].signum();
        let f = |rho: f64| self.off_axis_of_rho(rho) - target;
        let mut lo = 0.0;
        let mut hi = self.rho_limit;
        if f(hi) <= 0.0 {
            return hi;
        }
        let mut rho = 0.5 * (lo + hi);
        for _ in 0..200 {
            let val = f(rho);
            if val == 0.0 {
                return rho;
            }
            if val < 0.0 {
                lo = rho;
            } else {
                hi = rho;
            }
            // d/drho atan2(rho, s g) = s (g - rho g') / (rho^2 + g^2)
            let g = self.g(rho);
            let deriv = sign * (g - rho * self.g_prime(rho)) / (rho * rho + g * g);
            let newton = rho - val / deriv;
            let next = if deriv > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - rho).abs() <= 1e-15 * rho.max(1.0) {
                return next;
            }
            rho = next;
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        rho
    }

    pub fn to_calibration_file(&self) -> CalibrationFile {
        let [a0, a2, a3, a4] = self.poly;
        let m = self.affine;
        CalibrationFile {
            poly: [a0, 0.0, a2, a3, a4],
            affine: [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]],
            center: [self.center.x, self.center.y],
            size: [self.image_size.0, self.image_size.1],
            fov: self.fov_deg,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CalibrationFile = serde_json::from_str(text)?;
        OmniCameraModel::try_from(file)
    }
}

/// On-disk calibration layout.
///
/// * `poly`: `[a0, a1, a2, a3, a4]` with `a1` required to be 0
/// * `affine`: row-major 2x2 `A`
/// * `center`: `c` in sensor units
/// * `size`: `[width, height]` in pixels
/// * `fov`: full field of view in degrees
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub poly: [f64; 5],
    pub affine: [f64; 4],
    pub center: [f64; 2],
    pub size: [u32; 2],
    pub fov: f64,
}

impl TryFrom<CalibrationFile> for OmniCameraModel {
    type Error = Error;

    fn try_from(f: CalibrationFile) -> Result<Self> {
        if f.poly[1] != 0.0 {
            return Err(Error::InvalidCamera(
                "poly[1] (linear term) must be 0".into(),
            ));
        }
        OmniCameraModel::new(
            Matrix2::new(f.affine[0], f.affine[1], f.affine[2], f.affine[3]),
            Vector2::new(f.center[0], f.center[1]),
            [f.poly[0], f.poly[2], f.poly[3], f.poly[4]],
            (f.size[0], f.size[1]),
            f.fov,
        )
    }
}

impl Serialize for OmniCameraModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_calibration_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OmniCameraModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = CalibrationFile::deserialize(d)?;
        OmniCameraModel::try_from(f).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::Rotation;
    use approx::assert_relative_eq;

    fn simple_cam() -> OmniCameraModel {
        OmniCameraModel::new(
            Matrix2::identity(),
            Vector2::zeros(),
            [-300.0, 0.0, 0.0, 0.0],
            (640, 480),
            170.0,
        )
        .unwrap()
    }

    #[test]
    fn project_point_examples() {
        assert_eq!(
            *project_point(&Vector3::new(0.0, 0.0, 5.0))
                .unwrap()
                .vector(),
            Vector3::z()
        );
        assert_relative_eq!(
            *project_point(&Vector3::new(3.0, 4.0, 0.0))
                .unwrap()
                .vector(),
            Vector3::new(0.6, 0.8, 0.0)
        );
        assert!(matches!(
            project_point(&Vector3::new(1e-12, 0.0, 0.0)),
            Err(Error::DegeneratePoint(_))
        ));
    }

    #[test]
    fn projection_is_scale_invariant() {
        let x = Vector3::new(0.3, -1.7, 2.2);
        let a = project_point(&x).unwrap();
        let b = project_point(&(x * 4.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn center_pixel_maps_along_a0_sign() {
        let d = simple_cam().pixel_to_sphere(&Vector2::zeros()).unwrap();
        assert_eq!(*d.vector(), Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn pixel_outside_image_is_rejected() {
        let cam = simple_cam();
        assert!(cam.pixel_to_sphere(&Vector2::new(-1.0, 0.0)).is_err());
        assert!(cam.pixel_to_sphere(&Vector2::new(10.0, 481.0)).is_err());
    }

    #[test]
    fn synthesized_camera_geometry() {
        let cam = OmniCameraModel::synthesize(160.0, (1280, 960)).unwrap();
        let center = cam.pixel_to_sphere(&Vector2::new(640.0, 480.0)).unwrap();
        assert_relative_eq!(*center.vector(), Vector3::z(), epsilon = 1e-15);
        assert_relative_eq!(cam.distortion_center(), Vector2::new(640.0, 480.0));
        for edge in [Vector2::new(0.0, 480.0), Vector2::new(1280.0, 480.0)] {
            let d = cam.pixel_to_sphere(&edge).unwrap();
            let ang = cam.off_axis_angle(&d).to_degrees();
            assert!((ang - 80.0).abs() < 1.0, "edge angle {ang}");
        }
        let mut prev = -1.0;
        for i in 0..=800 {
            let rho = 640.0 * i as f64 / 800.0;
            let d = cam
                .pixel_to_sphere(&Vector2::new(640.0 + rho, 480.0))
                .unwrap();
            let ang = cam.off_axis_angle(&d);
            assert!(ang > prev);
            prev = ang;
        }
    }

    #[test]
    fn sphere_to_pixel_inverts() {
        let cam = OmniCameraModel::synthesize(160.0, (1280, 960)).unwrap();
        let axis = SpherePoint::from_vector(&Vector3::z()).unwrap();
        assert_relative_eq!(
            cam.sphere_to_pixel(&axis).unwrap(),
            Vector2::new(640.0, 480.0)
        );
        for uv in [
            Vector2::new(100.0, 480.0),
            Vector2::new(900.0, 100.0),
            Vector2::new(641.0, 481.0),
        ] {
            let d = cam.pixel_to_sphere(&uv).unwrap();
            let back = cam.sphere_to_pixel(&d).unwrap();
            assert!((back - uv).norm() < 1e-6, "{uv} -> {back}");
            let again = cam.pixel_to_sphere(&back).unwrap();
            assert!(d.angle_to(&again) < 1e-8);
        }
    }

    #[test]
    fn sphere_to_pixel_with_negative_a0() {
        let cam = simple_cam();
        for uv in [Vector2::new(10.0, 20.0), Vector2::new(300.0, 200.0)] {
            let d = cam.pixel_to_sphere(&uv).unwrap();
            assert!((cam.sphere_to_pixel(&d).unwrap() - uv).norm() < 1e-6);
        }
    }

    #[test]
    fn outside_fov_is_rejected() {
        let cam = OmniCameraModel::synthesize(160.0, (1280, 960)).unwrap();
        let ang = 80.01_f64.to_radians();
        let d = SpherePoint::from_vector(&Vector3::new(ang.sin(), 0.0, ang.cos())).unwrap();
        assert!(matches!(
            cam.sphere_to_pixel(&d),
            Err(Error::OutsideFov { .. })
        ));
        let ang = 79.9_f64.to_radians();
        let d = SpherePoint::from_vector(&Vector3::new(ang.sin(), 0.0, ang.cos())).unwrap();
        assert!(cam.sphere_to_pixel(&d).is_ok());
    }

    #[test]
    fn invalid_models() {
        let id = Matrix2::identity();
        let c = Vector2::zeros();
        assert!(
            OmniCameraModel::new(Matrix2::zeros(), c, [1.0, 0.0, 0.0, 0.0], (10, 10), 90.0)
                .is_err()
        );
        assert!(OmniCameraModel::new(id, c, [1.0, 0.0, 0.0, 0.0], (10, 10), 0.0).is_err());
        assert!(OmniCameraModel::new(id, c, [1.0, 0.0, 0.0, 0.0], (10, 10), 360.0).is_err());
        assert!(OmniCameraModel::new(id, c, [0.0, 1.0, 0.0, 0.0], (10, 10), 90.0).is_err());
        let bad = r#"{"poly":[-300,0.5,0,0,0],"affine":[1,0,0,1],"center":[0,0],"size":[10,10],"fov":90}"#;
        assert!(OmniCameraModel::from_json(bad).is_err());
    }

    #[test]
    fn calibration_file_round_trip() {
        let cam = OmniCameraModel::synthesize(160.0, (1280, 960)).unwrap();
        let text = serde_json::to_string(&cam).unwrap();
        let back = OmniCameraModel::from_json(&text).unwrap();
        assert_eq!(cam, back);
    }

    #[test]
    fn silhouette_hand_geometry() {
        let pose = Pose::new(Rotation::identity(), Vector3::new(0.0, 0.0, 100.0));
        let sil = tube_silhouette(&pose, 12.0).unwrap();
        // n = x cross z = -y
        let left = Vector3::new(0.0, -12.0, 100.0).normalize();
        let right = Vector3::new(0.0, 12.0, 100.0).normalize();
        assert_relative_eq!(*sil.left.vector(), left, epsilon = 1e-15);
        assert_relative_eq!(*sil.right.vector(), right, epsilon = 1e-15);
        let sep = sil.left.angle_to(&sil.right);
        let thin = 2.0 * (12.0_f64 / 100.0).asin();
        assert!((sep - thin).abs() / thin < 0.05);
    }

    #[test]
    fn zero_radius_collapses_to_center() {
        let pose = Pose::new(Rotation::about_z(0.4), Vector3::new(10.0, -5.0, 80.0));
        let sil = tube_silhouette(&pose, 0.0).unwrap();
        let c = project_point(&pose.p).unwrap();
        assert_eq!(sil.left, c);
        assert_eq!(sil.right, c);
    }

    #[test]
    fn silhouette_is_symmetric_for_perpendicular_tangent() {
        let pose = Pose::new(Rotation::about_z(0.9), Vector3::new(0.0, 0.0, 150.0));
        let sil = tube_silhouette(&pose, 12.0).unwrap();
        let c = project_point(&pose.p).unwrap();
        assert!((sil.left.angle_to(&c) - sil.right.angle_to(&c)).abs() < 1e-9);
    }

    #[test]
    fn silhouette_degenerate_cases() {
        let along_ray = Pose::new(
            Rotation::about_y(-std::f64::consts::FRAC_PI_2),
            Vector3::new(0.0, 0.0, 100.0),
        );
        assert!(matches!(
            tube_silhouette(&along_ray, 12.0),
            Err(Error::DegenerateSilhouette(_))
        ));
        let inside = Pose::new(Rotation::identity(), Vector3::new(0.0, 0.0, 5.0));
        assert!(tube_silhouette(&inside, 12.0).is_err());
    }

    #[test]
    fn sphere_point_json_checks_norm() {
        assert!(serde_json::from_str::<SpherePoint>("[0,0,1]").is_ok());
        assert!(serde_json::from_str::<SpherePoint>("[0,0,2]").is_err());
    }
}
