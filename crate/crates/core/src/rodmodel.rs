//! Integration of the rod kinematics `dX/ds = X Omega(s)` on SE(3).

use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{exp_pose, Pose, StrainTwist};
use crate::strainbasis::StrainField;

/// Rotation blocks are re-projected onto SO(3) after this many steps.
const REORTHONORMALIZE_EVERY: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    /// Lie-Euler: `X_{k+1} = X_k exp(h Omega(s_k))`.
    FirstOrderExp,
    /// Third-order Crouch-Grossman scheme.
    CrouchGrossman3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub method: IntegratorMethod,
    /// Number of uniform steps over `[0, L]` (breakpoints are added on top).
    pub steps: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            method: IntegratorMethod::FirstOrderExp,
            steps: 100,
        }
    }
}

impl IntegratorSpec {
    pub fn new(method: IntegratorMethod, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid(
                "integrator needs at least one step".into(),
            ));
        }
        Ok(IntegratorSpec { method, steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSample {
    pub s: f64,
    pub pose: Pose,
}

// Crouch-Grossman order 3 (Crouch & Grossman 1993).
const CG3_C: [f64; 3] = [0.0, 3.0 / 4.0, 17.0 / 24.0];
const CG3_B: [f64; 3] = [13.0 / 51.0, -2.0 / 3.0, 24.0 / 17.0];

struct Stepper<'a> {
    field: &'a StrainField,
    method: IntegratorMethod,
    scratch: Vec<f64>,
}

impl Stepper<'_> {
    fn omega(&mut self, s: f64) -> StrainTwist {
        let s = s.clamp(0.0, self.field.length());
        StrainTwist::bending(self.field.kappa_in_range(s, &mut self.scratch))
    }

    fn step(&mut self, x: &Pose, s: f64, h: f64) -> Pose {
        match self.method {
            IntegratorMethod::FirstOrderExp => x.compose(&exp_pose(&self.omega(s), h)),
            IntegratorMethod::CrouchGrossman3 => {
                let mut y = *x;
                for (c, b) in CG3_C.iter().zip(CG3_B.iter()) {
                    let w = self.omega(s + c * h);
                    y = y.compose(&exp_pose(&w, b * h));
                }
                y
            }
        }
    }
}

/// Step nodes: `steps` uniform intervals with the basis breakpoints snapped in.
fn step_nodes(field: &StrainField, steps: usize) -> Vec<f64> {
    let length = field.length();
    let mut nodes: Vec<f64> = (0..=steps)
        .map(|k| length * k as f64 / steps as f64)
        .collect();
    let snap = 1e-9 * length;
    for bp in field.basis().breakpoints() {
        let i = nodes.partition_point(|&n| n < bp);
        if i < nodes.len() && (nodes[i] - bp).abs() <= snap {
            nodes[i] = bp;
        } else if i > 0 && (bp - nodes[i - 1]).abs() <= snap {
            nodes[i - 1] = bp;
        } else {
            nodes.insert(i, bp);
        }
    }
    nodes
}

/// Poses of the cross-sections at the arclengths in `grid`, starting from
/// `x0` at `s = 0`.
///
/// Samples between step nodes are obtained by a partial step from the
/// preceding node, so a sample's pose does not depend on which other
/// arclengths are requested.
pub fn integrate_shape(
    field: &StrainField,
    x0: &Pose,
    grid: &[f64],
    spec: &IntegratorSpec,
) -> Result<Vec<ShapeSample>> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if spec.steps == 0 {
        return Err(Error::InvalidGrid(
            "integrator needs at least one step".into(),
        ));
    }
    let length = field.length();
    for &s in grid {
        field.basis().check_arclength(s)?;
    }
    if !grid.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::InvalidGrid("grid must be sorted".into()));
    }

    let nodes = step_nodes(field, spec.steps);
    let mut stepper = Stepper {
        field,
        method: spec.method,
        scratch: Vec::with_capacity(field.basis().family.dimension()),
    };
    let mut out = Vec::with_capacity(grid.len());
    let mut x = *x0;
    let mut node = 0usize;
    let mut taken = 0usize;
    for &s in grid {
        while node + 1 < nodes.len() && nodes[node + 1] <= s {
            x = stepper.step(&x, nodes[node], nodes[node + 1] - nodes[node]);
            node += 1;
            taken += 1;
            if taken.is_multiple_of(REORTHONORMALIZE_EVERY) {
                x.r = x.r.orthonormalized();
            }
        }
        let pose = if s == nodes[node] {
            x
        } else {
            let mut y = stepper.step(&x, nodes[node], s - nodes[node]);
            y.r = y.r.orthonormalized();
            y
        };
        out.push(ShapeSample { s, pose });
    }
    debug_assert!(out.last().is_none_or(|o| o.s <= length));
    Ok(out)
}

/// Pose of the tip cross-section `s = L`.
pub fn tip_pose(field: &StrainField, x0: &Pose, spec: &IntegratorSpec) -> Result<Pose> {
    let samples = integrate_shape(field, x0, &[field.length()], spec)?;
    Ok(samples[0].pose)
}

/// Unit tangent `R q` of a cross-section (with `q = (1, 0, 0)`).
pub fn tangent_at(sample: &ShapeSample) -> Vector3<f64> {
    (sample.pose.r * Vector3::x()).normalize()
}

/// `n + 1` evenly spaced arclengths covering `[0, length]`.
pub fn uniform_grid(length: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| length * i as f64 / n as f64).collect()
}

/// Writes `s, px, py, pz, r00 .. r22` rows for external plotting.
pub fn write_shape_csv<W: Write>(mut w: W, samples: &[ShapeSample]) -> Result<()> {
    writeln!(w, "s,px,py,pz,r00,r01,r02,r10,r11,r12,r20,r21,r22")?;
    for smp in samples {
        let m = smp.pose.r.matrix();
        let p = smp.pose.p;
        write!(w, "{},{},{},{}", smp.s, p.x, p.y, p.z)?;
        for i in 0..3 {
            for j in 0..3 {
                write!(w, ",{}", m[(i, j)])?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{exp_rotation, Rotation};
    use crate::strainbasis::{AxisSet, BasisFamily, BasisSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    const L: f64 = 287.0;

    fn constant_field(kappa: [f64; 3]) -> StrainField {
        let b = BasisSpec::new(BasisFamily::Constant, AxisSet::all(), L).unwrap();
        StrainField::new(b, kappa.to_vec().into()).unwrap()
    }

    #[test]
    fn straight_arm_tip() {
        let f = constant_field([0.0; 3]);
        let tip = tip_pose(&f, &Pose::identity(), &IntegratorSpec::default()).unwrap();
        assert_relative_eq!(tip.p, Vector3::new(L, 0.0, 0.0), epsilon = 1e-10);
        assert_relative_eq!(
            *tip.r.matrix(),
            *Rotation::identity().matrix(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn pure_twist_is_a_screw() {
        let kt = 0.01;
        let f = constant_field([kt, 0.0, 0.0]);
        let tip = tip_pose(&f, &Pose::identity(), &IntegratorSpec::default()).unwrap();
        assert_relative_eq!(tip.p, Vector3::new(L, 0.0, 0.0), epsilon = 1e-10);
        assert_relative_eq!(
            *tip.r.matrix(),
            *Rotation::about_x(kt * L).matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn constant_bend_matches_arc() {
        let k = FRAC_PI_2 / L;
        let f = constant_field([0.0, k, 0.0]);
        let tip = tip_pose(&f, &Pose::identity(), &IntegratorSpec::default()).unwrap();
        // bending about +y turns the x tangent towards -z
        let arc = Vector3::new((k * L).sin() / k, 0.0, -(1.0 - (k * L).cos()) / k);
        assert_relative_eq!(tip.p, arc, epsilon = 1e-9 * L);
    }

    #[test]
    fn first_sample_is_base() {
        let f = constant_field([0.001, 0.004, 0.0]);
        let x0 = Pose::new(Rotation::about_z(0.3), Vector3::new(1.0, 2.0, 3.0));
        let out = integrate_shape(&f, &x0, &[0.0, 10.0], &IntegratorSpec::default()).unwrap();
        assert_eq!(out[0].pose, x0);
    }

    #[test]
    fn tip_pose_matches_last_grid_sample() {
        let f = constant_field([0.002, 0.004, 0.0]);
        let spec = IntegratorSpec::default();
        let tip = tip_pose(&f, &Pose::identity(), &spec).unwrap();
        let shape = integrate_shape(&f, &Pose::identity(), &[0.0, L / 2.0, L], &spec).unwrap();
        assert_relative_eq!(shape[2].pose.p, tip.p, epsilon = 1e-12);
    }

    #[test]
    fn grid_errors() {
        let f = constant_field([0.0; 3]);
        let spec = IntegratorSpec::default();
        assert!(integrate_shape(&f, &Pose::identity(), &[], &spec).is_err());
        assert!(integrate_shape(&f, &Pose::identity(), &[L + 1.0], &spec).is_err());
        assert!(integrate_shape(&f, &Pose::identity(), &[-1.0], &spec).is_err());
        assert!(integrate_shape(&f, &Pose::identity(), &[10.0, 5.0], &spec).is_err());
        assert!(IntegratorSpec::new(IntegratorMethod::FirstOrderExp, 0).is_err());
    }

    #[test]
    fn tangent_examples() {
        let id = ShapeSample {
            s: 0.0,
            pose: Pose::identity(),
        };
        assert_eq!(tangent_at(&id), Vector3::x());
        let rz = ShapeSample {
            s: 0.0,
            pose: Pose::new(Rotation::about_z(FRAC_PI_2), Vector3::zeros()),
        };
        assert_relative_eq!(tangent_at(&rz), Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let b = BasisSpec::br2(BasisFamily::Polynomial { order: 2 }, L).unwrap();
        let f =
            StrainField::new(b, vec![0.004, 0.003, -0.002, 0.002, 0.001, 0.001].into()).unwrap();
        let spec = IntegratorSpec::new(IntegratorMethod::CrouchGrossman3, 2000).unwrap();
        let grid = uniform_grid(L, 2000);
        let shape = integrate_shape(&f, &Pose::identity(), &grid, &spec).unwrap();
        for i in (1..grid.len() - 1).step_by(97) {
            let fd = (shape[i + 1].pose.p - shape[i - 1].pose.p) / (grid[i + 1] - grid[i - 1]);
            assert!((fd - tangent_at(&shape[i])).norm() < 1e-4);
        }
    }

    #[test]
    fn orthogonality_is_maintained() {
        let f = constant_field([0.02, 0.01, 0.005]);
        let spec = IntegratorSpec::new(IntegratorMethod::FirstOrderExp, 5000).unwrap();
        let out = integrate_shape(&f, &Pose::identity(), &uniform_grid(L, 50), &spec).unwrap();
        for smp in out {
            assert!(smp.pose.r.orthogonality_error() < 1e-9);
        }
    }

    #[test]
    fn base_transform_moves_shape_rigidly() {
        let f = constant_field([0.003, 0.005, 0.0]);
        let g = Pose::new(
            exp_rotation(&Vector3::new(0.3, 0.1, -0.4), 1.0),
            Vector3::new(5.0, -2.0, 40.0),
        );
        let spec = IntegratorSpec::default();
        let grid = uniform_grid(L, 7);
        let a = integrate_shape(&f, &Pose::identity(), &grid, &spec).unwrap();
        let b = integrate_shape(&f, &g, &grid, &spec).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            let moved = g.compose(&sa.pose);
            assert!(
                (moved.to_homogeneous() - sb.pose.to_homogeneous())
                    .abs()
                    .max()
                    < 1e-9
            );
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = constant_field([0.0; 3]);
        let out =
            integrate_shape(&f, &Pose::identity(), &[0.0, L], &IntegratorSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_shape_csv(&mut buf, &out).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].split(',').count(), 13);
        assert!(lines[2].starts_with("287,287,0,0,1,"));
    }
}
