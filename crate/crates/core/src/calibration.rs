//! Base-pose and magnetic-sensor-chain calibration.
//!
//! Both problems reuse the silhouette residuals of the shape estimator,
//! restricted to a single cross-section (the base at `s = 0` or the tip at
//! `s = L`) with unit weights, and the same Levenberg-Marquardt loop. Poses
//! are optimized in a local chart `(exp(w) R, p + v)` re-centered after every
//! accepted step.

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{tube_silhouette, Silhouette};
use crate::error::{Error, Result};
use crate::liegroup::{exp_rotation, Pose, Rotation};
use crate::solver::{
    jacobian_singular_values, levenberg_marquardt, LeastSquaresProblem, SolveSummary, SolverOptions,
};

/// Relative singular-value threshold used for numerical rank.
pub const RANK_TOL: f64 = 1e-7;

/// Solver settings for calibration: the residuals vanish at a noiseless
/// optimum, so the gradient test is tightened well below the estimator's.
pub fn calibration_options() -> SolverOptions {
    SolverOptions {
        gtol: 1e-14,
        ..SolverOptions::default()
    }
}

/// Applies a 6-vector chart step `(w, v)` to a pose.
pub fn retract_pose(x: &Pose, delta: &[f64]) -> Pose {
    let w = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    Pose::new(exp_rotation(&w, 1.0) * x.r, x.p + v)
}

fn push_silhouette_residual(r: &mut DVector<f64>, row: usize, obs: &Silhouette, pred: &Silhouette) {
    r.fixed_rows_mut::<3>(row)
        .copy_from(&(obs.right.vector() - pred.right.vector()));
    r.fixed_rows_mut::<3>(row + 3)
        .copy_from(&(obs.left.vector() - pred.left.vector()));
}

fn numerical_rank(sv: &[f64]) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter()
        .filter(|v| **v > RANK_TOL * top && **v > 0.0)
        .count()
}

/// Closed-form position and tangent-free frame from a single silhouette.
///
/// The bisector of the two boundary directions points at the cross-section
/// center and their half-angle gives the depth. The returned tangent is the
/// one perpendicular to the viewing ray; the true tangent is only known up to
/// a tilt towards the ray and a roll about itself.
pub fn pose_from_silhouette(obs: &Silhouette, radius: f64) -> Result<Pose> {
    let r = obs.right.vector();
    let l = obs.left.vector();
    let mid = r + l;
    let half = 0.5 * r.angle(l);
    if mid.norm() < 1e-12 || half <= 0.0 {
        return Err(Error::InvalidObservations(
            "coincident or antipodal boundary directions".into(),
        ));
    }
    let dir = mid.normalize();
    let depth = radius / half.tan();
    let n = (l - r).normalize();
    let n = (n - dir * n.dot(&dir)).normalize();
    let t = dir.cross(&n);
    let m = Matrix3::from_columns(&[t, n, t.cross(&n)]);
    Ok(Pose::new(Rotation::project(&m)?, dir * depth))
}

/// Observed base silhouettes across images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCalibProblem {
    pub base_observations: Vec<Silhouette>,
    /// Arm radius in millimeters.
    pub radius: f64,
}

impl BaseCalibProblem {
    fn validate(&self) -> Result<()> {
        if self.base_observations.is_empty() {
            return Err(Error::InvalidObservations("no base observations".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidObservations(format!(
                "invalid radius {}",
                self.radius
            )));
        }
        Ok(())
    }
}

impl LeastSquaresProblem for BaseCalibProblem {
    type Params = Pose;

    fn dim(&self) -> usize {
        6
    }

    fn residuals(&self, x: &Pose) -> Result<DVector<f64>> {
        let pred = tube_silhouette(x, self.radius)?;
        let mut r = DVector::zeros(6 * self.base_observations.len());
        for (i, o) in self.base_observations.iter().enumerate() {
            push_silhouette_residual(&mut r, 6 * i, o, &pred);
        }
        Ok(r)
    }

    fn retract(&self, x: &Pose, delta: &DVector<f64>) -> Pose {
        retract_pose(x, delta.as_slice())
    }
}

/// Estimated base pose with solver and observability diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCalibration {
    pub base_pose: Pose,
    pub summary: SolveSummary,
    /// Jacobian singular values at the solution, largest first.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Set when fewer than six chart directions are constrained.
    pub low_observability: bool,
}

/// Minimizes the base reprojection cost over SE(3) starting from `init`.
pub fn estimate_base_pose(
    problem: &BaseCalibProblem,
    init: &Pose,
    options: &SolverOptions,
) -> Result<BaseCalibration> {
    problem.validate()?;
    let (pose, summary) = levenberg_marquardt(problem, *init, options)?;
    let sv = jacobian_singular_values(problem, &pose)?;
    let rank = numerical_rank(&sv);
    Ok(BaseCalibration {
        base_pose: pose,
        summary,
        singular_values: sv,
        rank,
        low_observability: rank < 6,
    })
}

/// Tip frame relative to the sensor frame: translation `(tx, 0, tz)` and a
/// rotation of `theta_x` about the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstrainedTipOffset {
    pub tx: f64,
    pub tz: f64,
    pub theta_x: f64,
}

impl ConstrainedTipOffset {
    pub fn to_pose(&self) -> Pose {
        Pose::new(
            Rotation::about_x(self.theta_x),
            Vector3::new(self.tx, 0.0, self.tz),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.tx.is_finite() && self.tz.is_finite() && self.theta_x.is_finite()
    }
}

/// Tip pose in the camera frame from a sensor reading.
pub fn sensor_to_tip(mag_to_cam: &Pose, sensor_in_mag: &Pose, tip_in_sensor: &Pose) -> Pose {
    *mag_to_cam * *sensor_in_mag * *tip_in_sensor
}

/// Unknowns of the sensor calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorChain {
    /// Magnetic-source frame expressed in the camera frame.
    pub mag_to_cam: Pose,
    pub tip_offset: ConstrainedTipOffset,
}

impl SensorChain {
    pub fn tip(&self, sensor_in_mag: &Pose) -> Pose {
        sensor_to_tip(&self.mag_to_cam, sensor_in_mag, &self.tip_offset.to_pose())
    }
}

/// Observed tip silhouettes paired with sensor readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibProblem {
    pub tip_observations: Vec<Silhouette>,
    /// Sensor pose in the magnetic-source frame, per image.
    pub sensor_poses: Vec<Pose>,
    pub radius: f64,
}

impl SensorCalibProblem {
    fn validate(&self) -> Result<()> {
        if self.tip_observations.len() != self.sensor_poses.len() {
            return Err(Error::InvalidObservations(format!(
                "{} tip observations for {} sensor poses",
                self.tip_observations.len(),
                self.sensor_poses.len()
            )));
        }
        if self.tip_observations.is_empty() {
            return Err(Error::InvalidObservations("no tip observations".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidObservations(format!(
                "invalid radius {}",
                self.radius
            )));
        }
        if self.sensor_poses.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidObservations("non-finite sensor pose".into()));
        }
        let first = &self.sensor_poses[0];
        let distinct = self
            .sensor_poses
            .iter()
            .any(|p| (p.p - first.p).norm() > 1e-9 || p.r.angle_to(&first.r) > 1e-9);
        if !distinct {
            return Err(Error::RankDeficient(
                "all sensor poses are identical".into(),
            ));
        }
        Ok(())
    }
}

impl LeastSquaresProblem for SensorCalibProblem {
    type Params = SensorChain;

    fn dim(&self) -> usize {
        9
    }

    fn residuals(&self, x: &SensorChain) -> Result<DVector<f64>> {
        let offset = x.tip_offset.to_pose();
        let mut r = DVector::zeros(6 * self.tip_observations.len());
        for (i, (o, sensor)) in self
            .tip_observations
            .iter()
            .zip(&self.sensor_poses)
            .enumerate()
        {
            let tip = sensor_to_tip(&x.mag_to_cam, sensor, &offset);
            push_silhouette_residual(&mut r, 6 * i, o, &tube_silhouette(&tip, self.radius)?);
        }
        Ok(r)
    }

    fn retract(&self, x: &SensorChain, delta: &DVector<f64>) -> SensorChain {
        SensorChain {
            mag_to_cam: retract_pose(&x.mag_to_cam, &delta.as_slice()[..6]),
            tip_offset: ConstrainedTipOffset {
                tx: x.tip_offset.tx + delta[6],
                tz: x.tip_offset.tz + delta[7],
                theta_x: x.tip_offset.theta_x + delta[8],
            },
        }
    }
}

/// Estimated sensor chain with diagnostics.
///
/// The roll `theta_x` of the tip offset moves neither the tip position nor
/// its tangent, so silhouettes cannot constrain it; it stays at its initial
/// value and the full rank is eight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibration {
    pub chain: SensorChain,
    pub summary: SolveSummary,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Rank expected for a well-posed sensor calibration.
pub const SENSOR_FULL_RANK: usize = 8;

/// Rigid transform `(R, t)` minimizing `sum |R a_i + t - b_i|^2`.
pub fn kabsch(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<Pose> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::RankDeficient(
            "need at least three point pairs".into(),
        ));
    }
    let n = a.len() as f64;
    let ca = a.iter().sum::<Vector3<f64>>() / n;
    let cb = b.iter().sum::<Vector3<f64>>() / n;
    let h = a.iter().zip(b).fold(Matrix3::zeros(), |h, (x, y)| {
        h + (y - cb) * (x - ca).transpose()
    });
    let r = Rotation::project(&h)?;
    Ok(Pose::new(r, cb - r * ca))
}

/// Initial chain from Kabsch alignment of sensor positions with tip points
/// triangulated from each silhouette; the tip offset starts at zero.
pub fn closed_form_sensor_init(problem: &SensorCalibProblem) -> Result<SensorChain> {
    problem.validate()?;
    let cam_pts = problem
        .tip_observations
        .iter()
        .map(|o| pose_from_silhouette(o, problem.radius).map(|p| p.p))
        .collect::<Result<Vec<_>>>()?;
    let mag_pts: Vec<_> = problem.sensor_poses.iter().map(|p| p.p).collect();
    Ok(SensorChain {
        mag_to_cam: kabsch(&mag_pts, &cam_pts)?,
        tip_offset: ConstrainedTipOffset::default(),
    })
}

/// Jointly estimates the magnetic-source frame and the tip offset.
pub fn estimate_sensor_transforms(
    problem: &SensorCalibProblem,
    init: &SensorChain,
    options: &SolverOptions,
) -> Result<SensorCalibration> {
    problem.validate()?;
    let rank0 = numerical_rank(&jacobian_singular_values(problem, init)?);
    if rank0 < SENSOR_FULL_RANK {
        return Err(Error::RankDeficient(format!(
            "Jacobian rank {rank0} at the initial point, need {SENSOR_FULL_RANK}"
        )));
    }
    let (chain, summary) = levenberg_marquardt(problem, *init, options)?;
    let sv = jacobian_singular_values(problem, &chain)?;
    let rank = numerical_rank(&sv);
    Ok(SensorCalibration {
        chain,
        summary,
        singular_values: sv,
        rank,
    })
}

/// Largest difference between two chains over the constrained quantities:
/// rotation angle (rad) and translation (mm) of the source frame, and the
/// tip-offset translations.
pub fn chain_disagreement(a: &SensorChain, b: &SensorChain) -> f64 {
    [
        a.mag_to_cam.r.angle_to(&b.mag_to_cam.r),
        (a.mag_to_cam.p - b.mag_to_cam.p).amax(),
        (a.tip_offset.tx - b.tip_offset.tx).abs(),
        (a.tip_offset.tz - b.tip_offset.tz).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Spread of random restarts around `init`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartSpread {
    pub rotation_rad: f64,
    pub translation_mm: f64,
    pub offset_mm: f64,
}

impl Default for RestartSpread {
    fn default() -> Self {
        RestartSpread {
            rotation_rad: 0.2,
            translation_mm: 20.0,
            offset_mm: 10.0,
        }
    }
}

/// Runs the sensor calibration from `count` random perturbations of `init`.
pub fn sensor_restarts(
    problem: &SensorCalibProblem,
    init: &SensorChain,
    count: usize,
    spread: &RestartSpread,
    seed: u64,
    options: &SolverOptions,
) -> Result<Vec<SensorCalibration>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut sym = |a: f64| rng.random_range(-a..=a);
            let delta = [
                sym(spread.rotation_rad),
                sym(spread.rotation_rad),
                sym(spread.rotation_rad),
                sym(spread.translation_mm),
                sym(spread.translation_mm),
                sym(spread.translation_mm),
            ];
            let start = SensorChain {
                mag_to_cam: retract_pose(&init.mag_to_cam, &delta),
                tip_offset: ConstrainedTipOffset {
                    tx: init.tip_offset.tx + sym(spread.offset_mm),
                    tz: init.tip_offset.tz + sym(spread.offset_mm),
                    theta_x: init.tip_offset.theta_x + sym(std::f64::consts::PI),
                },
            };
            estimate_sensor_transforms(problem, &start, options)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const RADIUS: f64 = 12.0;

    fn base_truth() -> Pose {
        Pose::new(
            Rotation::about_y(-PI / 2.0) * Rotation::about_x(PI / 2.0),
            Vector3::new(0.0, -45.0, 20.0),
        )
    }

    fn base_problem(images: usize) -> BaseCalibProblem {
        let sil = tube_silhouette(&base_truth(), RADIUS).unwrap();
        BaseCalibProblem {
            base_observations: vec![sil; images],
            radius: RADIUS,
        }
    }

    fn mag_truth() -> Pose {
        Pose::new(
            exp_rotation(&Vector3::new(0.3, -0.2, 0.5), 1.0),
            Vector3::new(40.0, -30.0, 150.0),
        )
    }

    fn offset_truth() -> ConstrainedTipOffset {
        ConstrainedTipOffset {
            tx: 8.0,
            tz: -3.0,
            theta_x: 0.4,
        }
    }

    /// Tip poses spread in front of the camera with varied tangents.
    fn sensor_problem(chain: &SensorChain, images: usize) -> SensorCalibProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut obs = Vec::new();
        let mut sensors = Vec::new();
        while obs.len() < images {
            let tip = Pose::new(
                exp_rotation(
                    &Vector3::new(
                        rng.random_range(-1.5..1.5),
                        rng.random_range(-1.5..1.5),
                        rng.random_range(-1.5..1.5),
                    ),
                    1.0,
                ),
                Vector3::new(
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-80.0..80.0),
                    rng.random_range(120.0..250.0),
                ),
            );
            let Ok(sil) = tube_silhouette(&tip, RADIUS) else {
                continue;
            };
            let sensor = chain.mag_to_cam.inverse() * tip * chain.tip_offset.to_pose().inverse();
            obs.push(sil);
            sensors.push(sensor);
        }
        SensorCalibProblem {
            tip_observations: obs,
            sensor_poses: sensors,
            radius: RADIUS,
        }
    }

    #[test]
    fn silhouette_pose_recovers_position() {
        let truth = base_truth();
        let sil = tube_silhouette(&truth, RADIUS).unwrap();
        let p = pose_from_silhouette(&sil, RADIUS).unwrap();
        assert!((p.p - truth.p).norm() < 1e-9);
        // the recovered frame reproduces the same silhouette
        let again = tube_silhouette(&p, RADIUS).unwrap();
        assert!((again.left.vector() - sil.left.vector()).norm() < 1e-12);
        assert!((again.right.vector() - sil.right.vector()).norm() < 1e-12);
    }

    #[test]
    fn base_init_at_truth_stops_immediately() {
        let c =
            estimate_base_pose(&base_problem(10), &base_truth(), &calibration_options()).unwrap();
        assert!(c.summary.final_cost < 1e-16);
        assert!(c.summary.iterations <= 1);
    }

    #[test]
    fn base_translation_recovered_from_perturbed_init() {
        let init = retract_pose(&base_truth(), &[0.02, -0.03, 0.01, 4.0, -3.0, 5.0]);
        let c = estimate_base_pose(&base_problem(10), &init, &calibration_options()).unwrap();
        assert!(c.summary.converged, "{:?}", c.summary);
        assert!(c.summary.final_cost < 1e-16);
        assert!((c.base_pose.p - base_truth().p).norm() < 1e-6);
    }

    #[test]
    fn base_rank_is_four_and_flagged() {
        for images in [1, 10] {
            let c =
                estimate_base_pose(&base_problem(images), &base_truth(), &calibration_options())
                    .unwrap();
            assert_eq!(c.rank, 4);
            assert!(c.low_observability);
        }
    }

    #[test]
    fn base_depth_perturbation_is_second_order_at_minimum() {
        let problem = base_problem(1);
        let truth = base_truth();
        let ray = truth.p.normalize();
        let moved = Pose::new(truth.r, truth.p + ray * 1e-4);
        let dc = problem.residuals(&moved).unwrap().norm_squared();
        assert!(dc < 1e-8);
    }

    #[test]
    fn base_result_independent_of_image_order() {
        let mut problem = base_problem(3);
        problem.base_observations[0] = tube_silhouette(
            &retract_pose(&base_truth(), &[0.0, 0.0, 0.0, 0.5, 0.0, 0.0]),
            RADIUS,
        )
        .unwrap();
        let init = retract_pose(&base_truth(), &[0.01, 0.0, 0.0, 1.0, 1.0, -1.0]);
        let a = estimate_base_pose(&problem, &init, &calibration_options()).unwrap();
        problem.base_observations.reverse();
        let b = estimate_base_pose(&problem, &init, &calibration_options()).unwrap();
        assert!((a.base_pose.p - b.base_pose.p).norm() < 1e-6);
        assert!(
            a.base_pose.r.angle_to(&b.base_pose.r) < 1e-6,
            "{} {:?} {:?}",
            a.base_pose.r.angle_to(&b.base_pose.r),
            a.summary,
            b.summary
        );
    }

    #[test]
    fn empty_base_problem_rejected() {
        let p = BaseCalibProblem {
            base_observations: vec![],
            radius: RADIUS,
        };
        assert!(estimate_base_pose(&p, &base_truth(), &calibration_options()).is_err());
    }

    #[test]
    fn tip_offset_is_constrained_by_construction() {
        let pose = ConstrainedTipOffset {
            tx: 3.0,
            tz: -2.0,
            theta_x: 1.1,
        }
        .to_pose();
        assert_eq!(pose.p.y, 0.0);
        let m = pose.r.matrix();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(1, 0)], 0.0);
    }

    #[test]
    fn sensor_to_tip_examples() {
        let id = Pose::identity();
        assert_eq!(sensor_to_tip(&id, &id, &id), id);
        let a = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let b = Pose::from_translation(Vector3::new(-4.0, 0.5, 1.0));
        let c = Pose::from_translation(Vector3::new(0.0, 0.0, 7.0));
        assert!((sensor_to_tip(&a, &b, &c).p - Vector3::new(-3.0, 2.5, 11.0)).norm() < 1e-15);
        let m = mag_truth();
        let t = offset_truth().to_pose();
        let x = sensor_to_tip(&m, &a, &t);
        assert!(
            (x.to_homogeneous() - m.to_homogeneous() * a.to_homogeneous() * t.to_homogeneous())
                .amax()
                < 1e-12
        );
    }

    #[test]
    fn kabsch_recovers_rigid_transform() {
        let t = mag_truth();
        let a: Vec<_> = (0..6)
            .map(|i| Vector3::new(i as f64, (i * i) as f64 * 0.3, (7 - i) as f64 * 1.7))
            .collect();
        let b: Vec<_> = a.iter().map(|x| t.transform_point(x)).collect();
        let k = kabsch(&a, &b).unwrap();
        assert!((k.p - t.p).norm() < 1e-9);
        assert!(k.r.angle_to(&t.r) < 1e-9);
    }

    #[test]
    fn sensor_chain_recovered_from_closed_form_init() {
        let truth = SensorChain {
            mag_to_cam: mag_truth(),
            tip_offset: offset_truth(),
        };
        let problem = sensor_problem(&truth, 20);
        let init = closed_form_sensor_init(&problem).unwrap();
        let c = estimate_sensor_transforms(&problem, &init, &calibration_options()).unwrap();
        assert!(c.summary.converged, "{:?}", c.summary.stop_reason);
        assert_eq!(c.rank, SENSOR_FULL_RANK);
        assert!(chain_disagreement(&c.chain, &truth) < 1e-6, "{:?}", c.chain);
        for s in &problem.sensor_poses {
            let est = c.chain.tip(s);
            let tru = truth.tip(s);
            assert!((est.p - tru.p).norm() < 1e-6);
            assert!(est.x_axis().angle(&tru.x_axis()) < 1e-6);
        }
    }

    #[test]
    fn identity_chain_recovered() {
        let truth = SensorChain {
            mag_to_cam: Pose::identity(),
            tip_offset: ConstrainedTipOffset::default(),
        };
        let problem = sensor_problem(&truth, 8);
        let init = closed_form_sensor_init(&problem).unwrap();
        let c = estimate_sensor_transforms(&problem, &init, &calibration_options()).unwrap();
        assert!(chain_disagreement(&c.chain, &truth) < 1e-6);
    }

    #[test]
    fn identical_sensor_poses_are_rank_deficient() {
        let truth = SensorChain {
            mag_to_cam: mag_truth(),
            tip_offset: offset_truth(),
        };
        let mut problem = sensor_problem(&truth, 5);
        let (o, s) = (problem.tip_observations[0], problem.sensor_poses[0]);
        problem.tip_observations = vec![o; 5];
        problem.sensor_poses = vec![s; 5];
        assert!(matches!(
            estimate_sensor_transforms(&problem, &truth, &calibration_options()),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn theta_x_is_unobservable() {
        let truth = SensorChain {
            mag_to_cam: mag_truth(),
            tip_offset: offset_truth(),
        };
        let problem = sensor_problem(&truth, 6);
        let mut rolled = truth;
        rolled.tip_offset.theta_x += 1.0;
        assert!(problem.residuals(&rolled).unwrap().amax() < 1e-12);
    }

    #[test]
    fn restarts_agree() {
        let truth = SensorChain {
            mag_to_cam: mag_truth(),
            tip_offset: offset_truth(),
        };
        let problem = sensor_problem(&truth, 20);
        let init = closed_form_sensor_init(&problem).unwrap();
        let runs = sensor_restarts(
            &problem,
            &init,
            5,
            &RestartSpread::default(),
            3,
            &calibration_options(),
        )
        .unwrap();
        for r in &runs {
            assert!(chain_disagreement(&r.chain, &runs[0].chain) < 1e-6);
        }
    }

    #[test]
    fn calibration_results_round_trip_json() {
        let chain = SensorChain {
            mag_to_cam: mag_truth(),
            tip_offset: offset_truth(),
        };
        let text = serde_json::to_string(&chain).unwrap();
        assert!(text.contains("\"theta_x\""));
        let back: SensorChain = serde_json::from_str(&text).unwrap();
        assert_eq!(back.tip_offset, chain.tip_offset);
        assert!((back.mag_to_cam.p - chain.mag_to_cam.p).norm() < 1e-12);
    }
}
