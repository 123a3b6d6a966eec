//! Synthetic scenarios and rendering of configurations into observations.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::ConstrainedTipOffset;
use crate::camera::{tube_silhouette, OmniCameraModel, Silhouette, SpherePoint};
use crate::error::{Error, Result};
use crate::estimator::ObservationSet;
use crate::liegroup::{exp_rotation, Pose, Rotation};
use crate::rodmodel::{integrate_shape, IntegratorSpec};
use crate::strainbasis::{
    BasisFamily, BasisSpec, CoefficientVector, StrainAxis, StrainField, BR2_LENGTH_MM,
};

use super::dataset::{ConfigRecord, Dataset, Exclusion, MarkerRecord};

pub const DEFAULT_RADIUS_MM: f64 = 12.0;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Actuation pressures in psi; every bend value is paired with every twist
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureGrid {
    pub bend_pressures: Vec<f64>,
    pub twist_pressures: Vec<f64>,
}

impl Default for PressureGrid {
    fn default() -> Self {
        PressureGrid {
            bend_pressures: linspace(0.0, 25.0, 10),
            twist_pressures: linspace(0.0, 20.0, 10),
        }
    }
}

impl PressureGrid {
    pub fn validate(&self) -> Result<()> {
        let all = self.bend_pressures.iter().chain(&self.twist_pressures);
        if all.clone().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Schema(
                "pressures must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// `(bend, twist)` pairs, bend-major.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.bend_pressures
            .iter()
            .flat_map(|b| self.twist_pressures.iter().map(move |t| (*b, *t)))
            .collect()
    }

    fn max_bend(&self) -> f64 {
        self.bend_pressures.iter().copied().fold(0.0, f64::max)
    }

    fn max_twist(&self) -> f64 {
        self.twist_pressures.iter().copied().fold(0.0, f64::max)
    }
}

/// Linear pressure-to-curvature gains in rad/mm per psi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureMap {
    pub bend_gain: f64,
    pub twist_gain: f64,
}

impl PressureMap {
    /// Gains taking 25 psi of bend to a quarter turn over the arm and 20 psi
    /// of twist to a half turn.
    pub fn for_length(length: f64) -> Self {
        PressureMap {
            bend_gain: 0.5 * PI / (25.0 * length),
            twist_gain: PI / (20.0 * length),
        }
    }

    /// Nominal curvature `(twist, bend)` for the given pressures.
    pub fn nominal(&self, bend_psi: f64, twist_psi: f64) -> (f64, f64) {
        (self.twist_gain * twist_psi, self.bend_gain * bend_psi)
    }
}

/// Ground-truth magnetic tracker placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSetup {
    pub mag_to_cam: Pose,
    pub tip_offset: ConstrainedTipOffset,
    /// Per-axis standard deviation of the reported position.
    pub position_noise_mm: f64,
    /// Per-axis standard deviation of the reported orientation.
    pub rotation_noise_deg: f64,
}

impl Default for SensorSetup {
    fn default() -> Self {
        SensorSetup {
            mag_to_cam: Pose::new(
                exp_rotation(&Vector3::new(0.3, -0.2, 0.5), 1.0),
                Vector3::new(40.0, -30.0, 150.0),
            ),
            tip_offset: ConstrainedTipOffset {
                tx: 10.0,
                tz: 2.0,
                theta_x: 0.3,
            },
            position_noise_mm: 1.0,
            rotation_noise_deg: 0.5,
        }
    }
}

/// Arm base hanging beside the camera with its tangent along the optical
/// axis; positive bend swings the tip across the image.
pub fn default_base_pose() -> Pose {
    Pose::new(Rotation::about_y(-PI / 2.0), Vector3::new(-45.0, 0.0, 20.0))
}

/// Everything needed to render a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub length_mm: f64,
    pub radius_mm: f64,
    pub camera: OmniCameraModel,
    pub true_basis: BasisSpec,
    pub pressure_map: PressureMap,
    pub grid: PressureGrid,
    pub marker_s: Vec<f64>,
    pub pixel_noise_sigma: f64,
    pub base_pose: Pose,
    pub integrator: IntegratorSpec,
    /// Relative spread of per-segment or higher-order truth coefficients.
    pub truth_perturbation: f64,
    pub sensor: SensorSetup,
    pub seed: u64,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        let length = BR2_LENGTH_MM;
        SyntheticScenario {
            length_mm: length,
            radius_mm: DEFAULT_RADIUS_MM,
            camera: OmniCameraModel::synthesize(160.0, (1280, 960))
                .expect("default camera is valid"),
            true_basis: BasisSpec::br2(BasisFamily::PiecewiseConstant { segments: 2 }, length)
                .expect("default basis is valid"),
            pressure_map: PressureMap::for_length(length),
            grid: PressureGrid::default(),
            marker_s: (1..=6).map(|m| length * m as f64 / 6.0).collect(),
            pixel_noise_sigma: 0.0,
            base_pose: default_base_pose(),
            integrator: IntegratorSpec::default(),
            truth_perturbation: 0.2,
            sensor: SensorSetup::default(),
            seed: 0,
        }
    }
}

/// Independent random stream for one configuration.
pub(crate) fn config_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl SyntheticScenario {
    /// Default scenario with a different ground-truth basis family.
    pub fn with_truth(family: BasisFamily) -> Result<Self> {
        let mut s = SyntheticScenario::default();
        s.true_basis = BasisSpec::br2(family, s.length_mm)?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.length_mm;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Schema(format!(
                "length_mm must be positive, got {l}"
            )));
        }
        if !(self.radius_mm.is_finite() && self.radius_mm > 0.0) {
            return Err(Error::Schema(format!(
                "radius_mm must be positive, got {}",
                self.radius_mm
            )));
        }
        if (self.true_basis.length - l).abs() > 1e-9 {
            return Err(Error::Schema(format!(
                "true_basis length {} differs from length_mm {l}",
                self.true_basis.length
            )));
        }
        if matches!(self.true_basis.family, BasisFamily::Sampled(_)) {
            return Err(Error::Schema(
                "sampled bases cannot be used as ground truth".into(),
            ));
        }
        if self.marker_s.is_empty()
            || !self.marker_s.windows(2).all(|w| w[0] < w[1])
            || self.marker_s.iter().any(|s| !(*s > 0.0 && *s <= l))
        {
            return Err(Error::Schema(
                "marker_s must be strictly increasing within (0, L]".into(),
            ));
        }
        if !(self.pixel_noise_sigma.is_finite() && self.pixel_noise_sigma >= 0.0) {
            return Err(Error::Schema(
                "pixel_noise_sigma must be non-negative".into(),
            ));
        }
        if !(self.truth_perturbation.is_finite() && self.truth_perturbation >= 0.0) {
            return Err(Error::Schema(
                "truth_perturbation must be non-negative".into(),
            ));
        }
        if !(self.sensor.position_noise_mm >= 0.0 && self.sensor.rotation_noise_deg >= 0.0) {
            return Err(Error::Schema("sensor noise must be non-negative".into()));
        }
        self.grid.validate()
    }

    /// Ground-truth coefficients for the given pressures.
    ///
    /// Piecewise segments scale the nominal curvature by independent factors
    /// in `1 +/- truth_perturbation`; polynomial terms above order zero are
    /// drawn in `+/- truth_perturbation` times the nominal value.
    pub fn true_coeffs<R: Rng>(
        &self,
        bend_psi: f64,
        twist_psi: f64,
        rng: &mut R,
    ) -> CoefficientVector {
        let (twist, bend) = self.pressure_map.nominal(bend_psi, twist_psi);
        let nominal: Vec<f64> = self
            .true_basis
            .axes
            .iter()
            .map(|a| match a {
                StrainAxis::TwistX => twist,
                StrainAxis::BendY => bend,
                StrainAxis::BendZ => 0.0,
            })
            .collect();
        let p = self.truth_perturbation;
        let mut out = Vec::with_capacity(self.true_basis.param_count());
        match self.true_basis.family {
            BasisFamily::PiecewiseConstant { segments } => {
                for _ in 0..segments {
                    out.extend(
                        nominal
                            .iter()
                            .map(|k| k * rng.random_range(1.0 - p..=1.0 + p)),
                    );
                }
            }
            BasisFamily::Polynomial { order } => {
                out.extend(&nominal);
                for _ in 0..order {
                    out.extend(nominal.iter().map(|k| k * rng.random_range(-p..=p)));
                }
            }
            _ => out.extend(&nominal),
        }
        CoefficientVector(out)
    }

    fn observe<R: Rng>(
        &self,
        d: &SpherePoint,
        rng: &mut R,
    ) -> std::result::Result<(Vector2<f64>, SpherePoint), String> {
        let px = self.camera.sphere_to_pixel(d).map_err(|e| e.to_string())?;
        if !self.camera.in_image(&px) {
            return Err(format!(
                "projects outside the image at ({:.1}, {:.1})",
                px.x, px.y
            ));
        }
        let du: f64 = rng.sample(StandardNormal);
        let dv: f64 = rng.sample(StandardNormal);
        let noisy = px + Vector2::new(du, dv) * self.pixel_noise_sigma;
        let back = self
            .camera
            .pixel_to_sphere(&noisy)
            .map_err(|e| e.to_string())?;
        Ok((noisy, back))
    }

    fn observe_silhouette<R: Rng>(
        &self,
        pose: &Pose,
        rng: &mut R,
    ) -> std::result::Result<(Silhouette, [Vector2<f64>; 2]), String> {
        let sil = tube_silhouette(pose, self.radius_mm).map_err(|e| e.to_string())?;
        let (pr, right) = self.observe(&sil.right, rng)?;
        let (pl, left) = self.observe(&sil.left, rng)?;
        Ok((Silhouette { left, right }, [pr, pl]))
    }

    fn noisy_sensor<R: Rng>(&self, tip: &Pose, rng: &mut R) -> Pose {
        let s = &self.sensor;
        let exact = s.mag_to_cam.inverse() * *tip * s.tip_offset.to_pose().inverse();
        let mut normal3 = || {
            Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
        };
        let w = normal3() * s.rotation_noise_deg.to_radians();
        let v = normal3() * s.position_noise_mm;
        Pose::new(exp_rotation(&w, 1.0) * exact.r, exact.p + v)
    }

    /// Renders one configuration; errors carry the exclusion reason.
    pub fn render_config(
        &self,
        id: usize,
        bend_psi: f64,
        twist_psi: f64,
    ) -> std::result::Result<ConfigRecord, String> {
        let mut rng = config_rng(self.seed, id as u64);
        let coeffs = self.true_coeffs(bend_psi, twist_psi, &mut rng);
        let field =
            StrainField::new(self.true_basis.clone(), coeffs.clone()).map_err(|e| e.to_string())?;
        let mut grid = vec![0.0];
        grid.extend(
            self.marker_s
                .iter()
                .copied()
                .filter(|s| *s > 0.0 && *s < self.length_mm),
        );
        grid.push(self.length_mm);
        let shape = integrate_shape(&field, &self.base_pose, &grid, &self.integrator)
            .map_err(|e| e.to_string())?;
        let pose_at = |s: f64| {
            shape
                .iter()
                .find(|smp| smp.s == s)
                .map(|smp| smp.pose)
                .expect("grid contains every marker")
        };
        let tip = shape.last().expect("grid is non-empty").pose;

        let mut observations = Vec::with_capacity(self.marker_s.len());
        for &s in &self.marker_s {
            let (sil, [pr, pl]) = self
                .observe_silhouette(&pose_at(s), &mut rng)
                .map_err(|e| format!("marker at s = {s:.3}: {e}"))?;
            observations.push(MarkerRecord {
                s,
                y_r: sil.right,
                y_l: sil.left,
                pixel_r: [pr.x, pr.y],
                pixel_l: [pl.x, pl.y],
            });
        }
        let (base_observation, _) = self
            .observe_silhouette(&shape[0].pose, &mut rng)
            .map_err(|e| format!("base: {e}"))?;
        let (tip_observation, _) = self
            .observe_silhouette(&tip, &mut rng)
            .map_err(|e| format!("tip: {e}"))?;
        let sensor_pose = self.noisy_sensor(&tip, &mut rng);
        Ok(ConfigRecord {
            id,
            bend_psi,
            twist_psi,
            true_coeffs: Some(coeffs),
            true_tip: Some(tip),
            observations,
            base_observation,
            tip_observation,
            sensor_pose: Some(sensor_pose),
            extra: Default::default(),
        })
    }

    fn render_all(&self, pressures: Vec<(f64, f64)>) -> Result<Dataset> {
        self.validate()?;
        let rendered: Vec<_> = pressures
            .par_iter()
            .enumerate()
            .map(|(id, &(b, t))| (id, b, t, self.render_config(id, b, t)))
            .collect();
        let mut configs = Vec::new();
        let mut excluded = Vec::new();
        for (id, b, t, r) in rendered {
            match r {
                Ok(c) => configs.push(c),
                Err(reason) => excluded.push(Exclusion {
                    id,
                    bend_psi: b,
                    twist_psi: t,
                    reason,
                }),
            }
        }
        Ok(Dataset::new(self.clone(), configs, excluded))
    }

    /// Renders the full pressure grid.
    pub fn generate_grid(&self) -> Result<Dataset> {
        self.render_all(self.grid.pairs())
    }

    /// Renders `count` configurations with pressures drawn uniformly inside
    /// the grid's range.
    pub fn generate_random(&self, count: usize) -> Result<Dataset> {
        let mut rng = config_rng(self.seed, u64::MAX);
        let (bmax, tmax) = (self.grid.max_bend(), self.grid.max_twist());
        let pressures = (0..count)
            .map(|_| (rng.random_range(0.0..=bmax), rng.random_range(0.0..=tmax)))
            .collect();
        self.render_all(pressures)
    }
}

impl ConfigRecord {
    /// Observation set for the estimator, with the scenario's base pose.
    pub fn observation_set(&self, base_pose: &Pose, radius: f64) -> ObservationSet {
        ObservationSet {
            samples: self
                .observations
                .iter()
                .map(|m| crate::camera::BoundaryObservation {
                    s: m.s,
                    right: m.y_r,
                    left: m.y_l,
                })
                .collect(),
            base_pose: *base_pose,
            radius,
        }
    }
}
