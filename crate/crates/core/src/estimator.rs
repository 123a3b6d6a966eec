//! Strain-coefficient estimation from silhouette boundary observations.
//!
//! The cost is the weighted sum over markers of squared chord distances
//! between observed and predicted boundary directions on the unit sphere.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::camera::{tube_silhouette, BoundaryObservation};
use crate::error::{Error, Result};
use crate::liegroup::Pose;
use crate::rodmodel::{integrate_shape, IntegratorSpec};
use crate::solver::{
    forward_jacobian, levenberg_marquardt, LeastSquaresProblem, SolveSummary, SolverOptions,
    StopReason,
};
use crate::strainbasis::{BasisSpec, CoefficientVector, StrainField};

/// Lower bound applied by [`linear_weights`].
pub const MIN_LINEAR_WEIGHT: f64 = 0.1;

/// Boundary observations of one image, with the base pose in camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub samples: Vec<BoundaryObservation>,
    pub base_pose: Pose,
    /// Arm radius in millimeters.
    pub radius: f64,
}

impl ObservationSet {
    pub fn validate(&self, length: f64) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidObservations("no marker observations".into()));
        }
        if !self.samples.windows(2).all(|w| w[0].s < w[1].s) {
            return Err(Error::InvalidObservations(
                "marker arclengths must be strictly increasing".into(),
            ));
        }
        for o in &self.samples {
            if !(0.0..=length).contains(&o.s) {
                return Err(Error::ArclengthOutOfRange { s: o.s, length });
            }
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(Error::InvalidObservations(format!(
                "invalid radius {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn arclengths(&self) -> Vec<f64> {
        self.samples.iter().map(|o| o.s).collect()
    }
}

/// Strictly positive per-marker weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidObservations(
                "weights must be strictly positive".into(),
            ));
        }
        Ok(WeightVector(w))
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|w| w * k).collect())
    }
}

/// Weights growing linearly towards the tip: `max(s / L, 0.1)`.
pub fn linear_weights(s_values: &[f64], length: f64) -> WeightVector {
    WeightVector(
        s_values
            .iter()
            .map(|s| (s / length).max(MIN_LINEAR_WEIGHT))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Linear,
    Uniform,
    Explicit(WeightVector),
}

impl WeightRule {
    pub fn weights(&self, obs: &ObservationSet, length: f64) -> Result<WeightVector> {
        let w = match self {
            WeightRule::Linear => linear_weights(&obs.arclengths(), length),
            WeightRule::Uniform => WeightVector::uniform(obs.samples.len()),
            WeightRule::Explicit(w) => w.clone(),
        };
        if w.len() != obs.samples.len() {
            return Err(Error::InvalidObservations(format!(
                "{} weights for {} markers",
                w.len(),
                obs.samples.len()
            )));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub solver: SolverOptions,
    pub integrator: IntegratorSpec,
    pub weights: WeightRule,
    /// Box bound on every coefficient; `None` disables bounds.
    pub coeff_bound: Option<f64>,
}

impl EstimatorOptions {
    /// Defaults for an arm of the given length; bounds at `4 pi / L`.
    pub fn for_length(length: f64) -> Self {
        EstimatorOptions {
            solver: SolverOptions::default(),
            integrator: IntegratorSpec::default(),
            weights: WeightRule::Linear,
            coeff_bound: Some(4.0 * PI / length),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coeffs: CoefficientVector,
    pub final_cost: f64,
    pub residual_norm_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Weighted residual norm per marker.
    pub per_marker_residuals: Vec<f64>,
}

struct ShapeProblem<'a> {
    basis: &'a BasisSpec,
    obs: &'a ObservationSet,
    sqrt_w: Vec<f64>,
    integrator: IntegratorSpec,
    bound: Option<f64>,
}

impl ShapeProblem<'_> {
    fn new<'a>(
        basis: &'a BasisSpec,
        obs: &'a ObservationSet,
        weights: &WeightVector,
        integrator: IntegratorSpec,
        bound: Option<f64>,
    ) -> Result<ShapeProblem<'a>> {
        obs.validate(basis.length)?;
        if weights.len() != obs.samples.len() {
            return Err(Error::InvalidObservations(format!(
                "{} weights for {} markers",
                weights.len(),
                obs.samples.len()
            )));
        }
        Ok(ShapeProblem {
            basis,
            obs,
            sqrt_w: weights.as_slice().iter().map(|w| w.sqrt()).collect(),
            integrator,
            bound,
        })
    }

    fn eval(&self, coeffs: &[f64]) -> Result<DVector<f64>> {
        let field = StrainField::new(self.basis.clone(), coeffs.to_vec().into())?;
        let shape = integrate_shape(
            &field,
            &self.obs.base_pose,
            &self.obs.arclengths(),
            &self.integrator,
        )?;
        let mut r = DVector::zeros(6 * self.obs.samples.len());
        for (m, (o, smp)) in self.obs.samples.iter().zip(&shape).enumerate() {
            let sil = tube_silhouette(&smp.pose, self.obs.radius)?;
            let w = self.sqrt_w[m];
            let dr = (o.right.vector() - sil.right.vector()) * w;
            let dl = (o.left.vector() - sil.left.vector()) * w;
            r.fixed_rows_mut::<3>(6 * m).copy_from(&dr);
            r.fixed_rows_mut::<3>(6 * m + 3).copy_from(&dl);
        }
        Ok(r)
    }
}

impl LeastSquaresProblem for ShapeProblem<'_> {
    type Params = DVector<f64>;

    fn dim(&self) -> usize {
        self.basis.param_count()
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.eval(x.as_slice())
    }

    fn retract(&self, x: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        let y = x + delta;
        match self.bound {
            Some(b) => y.map(|v| v.clamp(-b, b)),
            None => y,
        }
    }

    fn fd_step(&self, x: &DVector<f64>, i: usize) -> f64 {
        let h = (1e-6 * x[i].abs()).max(1e-6);
        match self.bound {
            Some(b) if x[i] + h > b => -h,
            _ => h,
        }
    }

    fn blocked(&self, x: &DVector<f64>, i: usize, gradient: f64) -> bool {
        match self.bound {
            Some(b) => (x[i] >= b && gradient < 0.0) || (x[i] <= -b && gradient > 0.0),
            None => false,
        }
    }
}

fn check_len(basis: &BasisSpec, coeffs: &CoefficientVector) -> Result<()> {
    if coeffs.len() != basis.param_count() {
        return Err(Error::CoefficientLength {
            expected: basis.param_count(),
            got: coeffs.len(),
        });
    }
    Ok(())
}

/// Stacked residuals `sqrt(w_m) (y_k(s_m) - P_k(X(s_m)))`, right then left,
/// for each marker; length `6 M`.
pub fn residuals(
    coeffs: &CoefficientVector,
    basis: &BasisSpec,
    obs: &ObservationSet,
    weights: &WeightVector,
    integrator: &IntegratorSpec,
) -> Result<DVector<f64>> {
    check_len(basis, coeffs)?;
    ShapeProblem::new(basis, obs, weights, *integrator, None)?.eval(coeffs.as_slice())
}

/// Weighted reprojection cost (squared norm of [`residuals`]).
pub fn cost(
    coeffs: &CoefficientVector,
    basis: &BasisSpec,
    obs: &ObservationSet,
    weights: &WeightVector,
    integrator: &IntegratorSpec,
) -> Result<f64> {
    Ok(residuals(coeffs, basis, obs, weights, integrator)?.norm_squared())
}

/// Forward-difference Jacobian of [`residuals`], `6 M x N`, with step
/// `max(1e-6, 1e-6 |a_i|)`.
pub fn jacobian(
    coeffs: &CoefficientVector,
    basis: &BasisSpec,
    obs: &ObservationSet,
    weights: &WeightVector,
    integrator: &IntegratorSpec,
) -> Result<DMatrix<f64>> {
    check_len(basis, coeffs)?;
    let problem = ShapeProblem::new(basis, obs, weights, *integrator, None)?;
    let x = DVector::from_column_slice(coeffs.as_slice());
    let r0 = problem.eval(coeffs.as_slice())?;
    forward_jacobian(&problem, &x, &r0)
}

/// Fits basis coefficients to the observations starting from `init`.
pub fn solve_shape(
    obs: &ObservationSet,
    basis: &BasisSpec,
    init: &CoefficientVector,
    options: &EstimatorOptions,
) -> Result<FitResult> {
    check_len(basis, init)?;
    let weights = options.weights.weights(obs, basis.length)?;
    let problem = ShapeProblem::new(
        basis,
        obs,
        &weights,
        options.integrator,
        options.coeff_bound,
    )?;
    let x0 = problem.retract(
        &DVector::from_column_slice(init.as_slice()),
        &DVector::zeros(init.len()),
    );
    let (x, summary) = levenberg_marquardt(&problem, x0, &options.solver)?;
    let r = problem.eval(x.as_slice())?;
    Ok(fit_result(x, summary, &r))
}

fn fit_result(x: DVector<f64>, summary: SolveSummary, r: &DVector<f64>) -> FitResult {
    let per_marker = (0..r.len() / 6)
        .map(|m| r.fixed_rows::<6>(6 * m).norm())
        .collect();
    FitResult {
        coeffs: CoefficientVector(x.iter().copied().collect()),
        final_cost: summary.final_cost,
        residual_norm_history: summary.residual_norm_history,
        iterations: summary.iterations,
        converged: summary.converged,
        stop_reason: summary.stop_reason,
        per_marker_residuals: per_marker,
    }
}
