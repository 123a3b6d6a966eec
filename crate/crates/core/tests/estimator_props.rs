use proptest::prelude::*;

use strainshape::estimator::{cost, solve_shape, EstimatorOptions, WeightRule};
use strainshape::experiments::{tip_errors, SyntheticScenario};
use strainshape::rodmodel::tip_pose;
use strainshape::strainbasis::{BasisFamily, BasisSpec, CoefficientVector, StrainField};

fn scenario(noise: f64) -> SyntheticScenario {
    SyntheticScenario {
        pixel_noise_sigma: noise,
        ..Default::default()
    }
}

fn two_segment(sc: &SyntheticScenario) -> BasisSpec {
    BasisSpec::br2(BasisFamily::PiecewiseConstant { segments: 2 }, sc.length_mm).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cost_is_nonnegative_and_zero_only_at_truth(
        bend in 0.0..25.0f64,
        twist in 0.0..20.0f64,
        delta in prop::collection::vec(-0.005..0.005f64, 4),
    ) {
        let sc = scenario(0.0);
        let basis = two_segment(&sc);
        let rec = sc.render_config(0, bend, twist).unwrap();
        let obs = rec.observation_set(&sc.base_pose, sc.radius_mm);
        let weights = WeightRule::Linear.weights(&obs, sc.length_mm).unwrap();
        let truth = rec.true_coeffs.clone().unwrap();
        let at_truth = cost(&truth, &basis, &obs, &weights, &sc.integrator).unwrap();
        prop_assert!(at_truth < 1e-20);
        let moved = CoefficientVector(truth.0.iter().zip(&delta).map(|(a, d)| a + d).collect());
        let off = cost(&moved, &basis, &obs, &weights, &sc.integrator).unwrap();
        prop_assert!(off >= 0.0);
        if delta.iter().any(|d| d.abs() > 1e-4) {
            prop_assert!(off > 0.0);
        }
    }

    #[test]
    fn accepted_costs_never_increase(bend in 0.0..25.0f64, twist in 0.0..20.0f64, seed in 0..1000u64) {
        let mut sc = scenario(2.0);
        sc.seed = seed;
        let basis = two_segment(&sc);
        let rec = sc.render_config(0, bend, twist).unwrap();
        let obs = rec.observation_set(&sc.base_pose, sc.radius_mm);
        let fit = solve_shape(&obs, &basis, &CoefficientVector::zeros(4), &EstimatorOptions::for_length(sc.length_mm))
            .unwrap();
        prop_assert!(fit.residual_norm_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(fit.final_cost >= 0.0);
    }
}

#[test]
fn noiseless_fits_recover_the_rendered_tip() {
    let sc = scenario(0.0);
    let basis = two_segment(&sc);
    let options = EstimatorOptions::for_length(sc.length_mm);
    for (id, (bend, twist)) in [(0.0, 0.0), (12.5, 10.0), (25.0, 20.0), (25.0, 0.0)]
        .into_iter()
        .enumerate()
    {
        let rec = sc.render_config(id, bend, twist).unwrap();
        let obs = rec.observation_set(&sc.base_pose, sc.radius_mm);
        let fit = solve_shape(&obs, &basis, &CoefficientVector::zeros(4), &options).unwrap();
        assert!(fit.converged);
        let field = StrainField::new(basis.clone(), fit.coeffs.clone()).unwrap();
        let tip = tip_pose(&field, &sc.base_pose, &sc.integrator).unwrap();
        assert!(tip_errors(&tip, rec.true_tip.as_ref().unwrap()).e1 < 1e-3);
    }
}
