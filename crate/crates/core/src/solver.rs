//! Levenberg-Marquardt with Marquardt scaling and Nielsen damping updates.
//!
//! Problems supply residuals and a retraction `x (+) delta`, which lets the
//! same loop handle plain vectors (with box projection) and poses (local
//! charts re-centered after every accepted step). Jacobians are forward
//! differences through the retraction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    type Params: Clone;

    /// Number of local coordinates.
    fn dim(&self) -> usize;

    fn residuals(&self, x: &Self::Params) -> Result<DVector<f64>>;

    /// Applies a step in local coordinates.
    fn retract(&self, x: &Self::Params, delta: &DVector<f64>) -> Self::Params;

    /// Finite-difference step for coordinate `i`; may be negative.
    fn fd_step(&self, _x: &Self::Params, _i: usize) -> f64 {
        1e-6
    }

    /// True when coordinate `i` sits on a bound and the descent direction
    /// `-gradient` points out of the feasible set; such coordinates are held
    /// fixed for the next step.
    fn blocked(&self, _x: &Self::Params, _i: usize, _gradient: f64) -> bool {
        false
    }
}

/// Jacobian with blocked columns zeroed, and the matching gradient.
fn free_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &P::Params,
    mut jac: DMatrix<f64>,
    r: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let g = jac.tr_mul(r);
    for i in 0..jac.ncols() {
        if problem.blocked(x, i, g[i]) {
            jac.column_mut(i).fill(0.0);
        }
    }
    let g = jac.tr_mul(r);
    (jac, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the gradient over unblocked coordinates has max-norm below `gtol`.
    pub gtol: f64,
    /// Stop when an accepted step reduces the cost by less than `ftol * cost`.
    pub ftol: f64,
    /// Stop when the step falls below `xtol` in max-norm.
    pub xtol: f64,
    /// Cap on trial steps (accepted or rejected).
    pub max_iterations: usize,
    /// Initial damping relative to the largest eigenvalue of `J^T J`.
    pub initial_damping: f64,
    /// Directions of the Jacobian with singular value below
    /// `rank_tol * sigma_max` are left untouched by a step.
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_rank_tol() -> f64 {
    1e-5
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gtol: 1e-10,
            ftol: 1e-12,
            xtol: 1e-15,
            max_iterations: 200,
            initial_damping: 1.0,
            rank_tol: default_rank_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ZeroCost,
    Gradient,
    CostChange,
    StepSize,
    MaxIterations,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        !matches!(self, StopReason::MaxIterations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    /// Sum of squared residuals at the returned point.
    pub final_cost: f64,
    /// Residual norm at the start and after every accepted step.
    pub residual_norm_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

/// Forward-difference Jacobian at `x` given `r0 = residuals(x)`.
pub fn forward_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &P::Params,
    r0: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = problem.dim();
    let mut jac = DMatrix::zeros(r0.len(), n);
    let mut delta = DVector::zeros(n);
    for i in 0..n {
        let h = problem.fd_step(x, i);
        delta[i] = h;
        let col = match problem.residuals(&problem.retract(x, &delta)) {
            Ok(r) => (r - r0) / h,
            Err(_) => {
                delta[i] = -h;
                (problem.residuals(&problem.retract(x, &delta))? - r0) / -h
            }
        };
        delta[i] = 0.0;
        jac.set_column(i, &col);
    }
    Ok(jac)
}

/// SVD of `J` at one linearization point, reused for every damping value.
struct JacobianSvd {
    u_tr: DVector<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    top: f64,
}

impl JacobianSvd {
    fn new(jac: &DMatrix<f64>, r: &DVector<f64>, rank_tol: f64) -> Option<Self> {
        if !jac.iter().all(|v| v.is_finite()) {
            return None;
        }
        let svd = jac.clone().svd(true, true);
        let (u, v_t) = (svd.u?, svd.v_t?);
        let top = svd.singular_values.max();
        let sigma = svd
            .singular_values
            .map(|s| if s > rank_tol * top { s } else { 0.0 });
        Some(JacobianSvd {
            u_tr: u.tr_mul(r),
            sigma,
            v: v_t.transpose(),
            top,
        })
    }

    /// Minimizer of `|r + J d|^2 + mu sigma_max^2 |d|^2` over the retained
    /// right singular vectors.
    fn step(&self, mu: f64) -> DVector<f64> {
        let damping = mu * self.top * self.top;
        let mut d = DVector::zeros(self.v.nrows());
        for (k, s) in self.sigma.iter().enumerate() {
            if *s > 0.0 {
                d -= self.v.column(k) * (s * self.u_tr[k] / (s * s + damping));
            }
        }
        d
    }
}

/// Minimizes `|r(x)|^2` from `x0`.
pub fn levenberg_marquardt<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: P::Params,
    options: &SolverOptions,
) -> Result<(P::Params, SolveSummary)> {
    let mut x = x0;
    let mut r = problem.residuals(&x)?;
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteResiduals);
    }
    let mut cost = r.norm_squared();
    let mut history = vec![cost.sqrt()];

    let finish = |x, cost, history, iterations, reason: StopReason| {
        Ok((
            x,
            SolveSummary {
                final_cost: cost,
                residual_norm_history: history,
                iterations,
                converged: reason.is_converged(),
                stop_reason: reason,
            },
        ))
    };

    if cost == 0.0 {
        return finish(x, cost, history, 0, StopReason::ZeroCost);
    }

    let (mut jac, mut g) = free_jacobian(problem, &x, forward_jacobian(problem, &x, &r)?, &r);
    let Some(mut svd) = JacobianSvd::new(&jac, &r, options.rank_tol) else {
        return Err(Error::NonFiniteResiduals);
    };
    let mut mu = options.initial_damping;
    let mut nu = 2.0;
    let mut iterations = 0;

    loop {
        if g.amax() < options.gtol {
            return finish(x, cost, history, iterations, StopReason::Gradient);
        }
        if iterations >= options.max_iterations {
            return finish(x, cost, history, iterations, StopReason::MaxIterations);
        }
        iterations += 1;

        let delta = svd.step(mu);
        if delta.amax() < options.xtol {
            return finish(x, cost, history, iterations, StopReason::StepSize);
        }

        let candidate = problem.retract(&x, &delta);
        let trial = problem
            .residuals(&candidate)
            .ok()
            .filter(|rr| rr.iter().all(|v| v.is_finite()));
        let predicted = 0.5 * (cost - (&r + &jac * &delta).norm_squared());
        match trial {
            Some(r_new) if r_new.norm_squared() < cost => {
                let new_cost = r_new.norm_squared();
                let actual = 0.5 * (cost - new_cost);
                let rho = if predicted > 0.0 {
                    actual / predicted
                } else {
                    0.0
                };
                let rel_change = (cost - new_cost) / cost;
                x = candidate;
                r = r_new;
                cost = new_cost;
                history.push(cost.sqrt());
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                if cost == 0.0 {
                    return finish(x, cost, history, iterations, StopReason::ZeroCost);
                }
                if rel_change < options.ftol {
                    return finish(x, cost, history, iterations, StopReason::CostChange);
                }
                (jac, g) = free_jacobian(problem, &x, forward_jacobian(problem, &x, &r)?, &r);
                svd = JacobianSvd::new(&jac, &r, options.rank_tol)
                    .ok_or(Error::NonFiniteResiduals)?;
            }
            _ => {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() {
                    return finish(x, cost, history, iterations, StopReason::StepSize);
                }
            }
        }
    }
}

/// Singular values of `J` at `x`, largest first.
pub fn jacobian_singular_values<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &P::Params,
) -> Result<Vec<f64>> {
    let r = problem.residuals(x)?;
    let jac = forward_jacobian(problem, x, &r)?;
    if !jac.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteResiduals);
    }
    let mut sv: Vec<f64> = jac.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}
