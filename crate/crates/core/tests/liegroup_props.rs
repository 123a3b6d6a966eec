use approx::assert_relative_eq;
use nalgebra::{Matrix3, Matrix4, SMatrix, Vector3};
use proptest::prelude::*;

use strainshape::liegroup::{exp_pose, exp_rotation, hat3, Rotation, StrainTwist, GROUP_TOL};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

/// Taylor series with scaling and squaring, independent of the closed forms.
fn series_exp<const N: usize>(a: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let mut k = 0;
    let mut m = *a;
    while m.norm() > 0.5 {
        m /= 2.0;
        k += 1;
    }
    let mut sum = SMatrix::<f64, N, N>::identity();
    let mut term = sum;
    for n in 1..=20 {
        term = term * m / n as f64;
        sum += term;
    }
    for _ in 0..k {
        sum = sum * sum;
    }
    sum
}

proptest! {
    #[test]
    fn hat_is_cross_product(v in vec3(10.0), w in vec3(10.0)) {
        prop_assert!((hat3(&v) * w - v.cross(&w)).amax() < 1e-14 * (1.0 + v.norm() * w.norm()));
    }

    #[test]
    fn exp_rotation_is_a_rotation(w in vec3(4.0 * std::f64::consts::PI), scale in 0.0..1.0f64) {
        let r = exp_rotation(&w, scale);
        prop_assert!(r.orthogonality_error() < GROUP_TOL);
        prop_assert!((r.matrix().determinant() - 1.0).abs() < GROUP_TOL);
        prop_assert!(Rotation::from_matrix(*r.matrix()).is_ok());
    }

    #[test]
    fn exp_rotation_matches_series(w in vec3(7.0)) {
        let series: Matrix3<f64> = series_exp(&hat3(&w));
        prop_assert!((exp_rotation(&w, 1.0).matrix() - series).amax() < 1e-10);
    }

    #[test]
    fn exp_pose_matches_series(w in vec3(7.0), v in vec3(100.0)) {
        let mut twist = Matrix4::zeros();
        twist.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&w));
        twist.fixed_view_mut::<3, 1>(0, 3).copy_from(&v);
        let series = series_exp(&twist);
        let closed = exp_pose(&StrainTwist::new(w, v), 1.0).to_homogeneous();
        prop_assert!((closed - series).amax() < 1e-10 * (1.0 + v.norm()));
    }

    #[test]
    fn zero_curvature_is_pure_translation(v in vec3(100.0), scale in 0.0..300.0f64) {
        let x = exp_pose(&StrainTwist::new(Vector3::zeros(), v), scale);
        prop_assert_eq!(*x.r.matrix(), Matrix3::identity());
        prop_assert!((x.p - v * scale).amax() < 1e-12 * (1.0 + scale * v.norm()));
    }

    #[test]
    fn no_jump_across_small_angle_branch(axis in vec3(1.0).prop_filter("nonzero", |a| a.norm() > 0.1), f in 0.5..2.0f64) {
        let u = axis.normalize();
        let a = exp_rotation(&(u * 1e-10 * f), 1.0);
        let b = exp_rotation(&(u * 1e-10 / f), 1.0);
        prop_assert!((a.matrix() - b.matrix()).amax() < 1e-9);
    }

    #[test]
    fn inverse_composes_to_identity(w in vec3(3.0), v in vec3(50.0)) {
        let x = exp_pose(&StrainTwist::new(w, v), 1.0);
        let e = x.compose(&x.inverse());
        assert_relative_eq!(e.to_homogeneous(), Matrix4::identity(), epsilon = 1e-12);
    }
}
