//! Ground-truth trajectory generation for linear-quadratic problems with box
//! control constraints, plus minimum-principle checks on arbitrary trajectories.
//!
//! The stage cost is `x' diag(w_x) x + u' diag(w_u) u` summed over `k = 0..=K`,
//! which is `theta' L` for the diagonal quadratic basis with
//! `theta = [w_x; w_u]`.
//!
//! Constrained problems are solved by a primal-dual active-set iteration: each
//! iterate fixes a subset of control components at their bounds and solves the
//! remaining equality-constrained problem exactly with an affine Riccati sweep.
//! Projected accelerated gradient is used as a fallback if the active set cycles.

use std::collections::HashSet;

use log::debug;

use crate::error::{IocError, Result};
use crate::model::{make_lti_model, quadratic_basis, ConstraintSet, Matrix, ProblemModel, Trajectory, Vector};

/// A finite-horizon LQ problem with diagonal weights and a box on the controls.
#[derive(Debug, Clone, PartialEq)]
pub struct LqProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub state_weights: Vector,
    pub control_weights: Vector,
    pub x0: Vector,
    pub horizon: usize,
    pub constraints: ConstraintSet,
}

impl LqProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        if !self.a.is_square() || self.b.nrows() != n || m == 0 {
            return Err(IocError::dims(
                "LQ matrices",
                "A n x n, B n x m",
                format!("A {:?}, B {:?}", self.a.shape(), self.b.shape()),
            ));
        }
        if self.state_weights.len() != n || self.x0.len() != n {
            return Err(IocError::dims(
                "state weights / x0",
                n,
                format!("{} / {}", self.state_weights.len(), self.x0.len()),
            ));
        }
        if self.control_weights.len() != m || self.constraints.dim() != m {
            return Err(IocError::dims(
                "control weights / box",
                m,
                format!("{} / {}", self.control_weights.len(), self.constraints.dim()),
            ));
        }
        if self
            .state_weights
            .iter()
            .chain(self.control_weights.iter())
            .any(|w| !(*w > 0.0))
        {
            return Err(IocError::InvalidArgument("LQ weights must be strictly positive".into()));
        }
        if self.horizon == 0 {
            return Err(IocError::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    /// The objective parameters `[w_x; w_u]` for the diagonal quadratic basis.
    pub fn theta(&self) -> Vector {
        Vector::from_iterator(
            self.state_dim() + self.control_dim(),
            self.state_weights.iter().chain(self.control_weights.iter()).copied(),
        )
    }

    /// The model seen by the inverse problem: linear dynamics, diagonal quadratic basis.
    pub fn model(&self) -> Result<ProblemModel> {
        make_lti_model(
            self.a.clone(),
            self.b.clone(),
            quadratic_basis(self.state_dim(), self.control_dim()),
        )
    }

    pub fn objective(&self, traj: &Trajectory) -> f64 {
        traj.pairs()
            .map(|(x, u)| weighted_sq(&self.state_weights, x) + weighted_sq(&self.control_weights, u))
            .sum()
    }

    /// Rolls the dynamics forward from `x0` under the given controls.
    pub fn rollout(&self, controls: Vec<Vector>) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(controls.len());
        let mut x = self.x0.clone();
        for (k, u) in controls.iter().enumerate() {
            states.push(x.clone());
            if k + 1 < controls.len() {
                x = &self.a * &x + &self.b * u;
            }
        }
        Trajectory::new(states, controls)
    }

    /// Gradient of the objective with respect to each `u_k` (the control
    /// gradient of the Hamiltonian along the adjoint with `lambda_{K+1} = 0`).
    pub fn control_gradients(&self, traj: &Trajectory) -> Vec<Vector> {
        let k_final = traj.horizon();
        let mut grads = vec![Vector::zeros(self.control_dim()); k_final + 1];
        let mut lambda_next = Vector::zeros(self.state_dim());
        for k in (0..=k_final).rev() {
            let x = &traj.states()[k];
            let u = &traj.controls()[k];
            grads[k] = 2.0 * self.control_weights.component_mul(u) + self.b.tr_mul(&lambda_next);
            lambda_next = 2.0 * self.state_weights.component_mul(x) + self.a.tr_mul(&lambda_next);
        }
        grads
    }
}

fn weighted_sq(w: &Vector, v: &Vector) -> f64 {
    w.iter().zip(v.iter()).map(|(w, v)| w * v * v).sum()
}

/// Options for [`solve_box_constrained_lq`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on the variational-inequality residual at termination.
    pub tol: f64,
    pub max_active_set_iterations: usize,
    pub max_gradient_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_active_set_iterations: 200,
            max_gradient_iterations: 200_000,
        }
    }
}

/// Optimal trajectory when the box is ignored (backward Riccati sweep, forward rollout).
pub fn solve_unconstrained_lq(p: &LqProblem) -> Result<Trajectory> {
    p.validate()?;
    let fixed = vec![vec![None; p.control_dim()]; p.horizon + 1];
    p.rollout(riccati_with_fixed(p, &fixed)?)
}

/// Per-component fixing pattern: `None` is free, `Some(v)` pins the component to `v`.
type Fixing = Vec<Vec<Option<f64>>>;

/// Exact minimiser over the free control components with the rest pinned.
fn riccati_with_fixed(p: &LqProblem, fixed: &Fixing) -> Result<Vec<Vector>> {
    let n = p.state_dim();
    let m = p.control_dim();
    let horizon = p.horizon;
    let q = Matrix::from_diagonal(&p.state_weights);
    let a = &p.a;
    let a_t = a.transpose();

    struct Gain {
        free: Vec<usize>,
        feedback: Matrix,
        feedforward: Vector,
    }
    let mut gains: Vec<Gain> = Vec::with_capacity(horizon);
    let mut pmat = q.clone();
    let mut pvec = Vector::zeros(n);

    for k in (0..horizon).rev() {
        let free: Vec<usize> = (0..m).filter(|&i| fixed[k][i].is_none()).collect();
        let pinned = Vector::from_iterator(m, fixed[k].iter().map(|v| v.unwrap_or(0.0)));
        let drift = &p.b * &pinned;
        let w = &pmat * &drift + &pvec;
        let (feedback, feedforward, a_cl) = if free.is_empty() {
            (Matrix::zeros(0, n), Vector::zeros(0), a.clone())
        } else {
            let b_free = p.b.select_columns(free.iter());
            let pb = &pmat * &b_free;
            let mut gram = b_free.tr_mul(&pb);
            for (j, &i) in free.iter().enumerate() {
                gram[(j, j)] += p.control_weights[i];
            }
            let chol = gram.cholesky().ok_or_else(|| {
                IocError::Numerical(format!("Riccati step {k}: control Hessian not positive definite"))
            })?;
            let feedback = chol.solve(&pb.tr_mul(a));
            let feedforward = chol.solve(&b_free.tr_mul(&w));
            let a_cl = a - &b_free * &feedback;
            (feedback, feedforward, a_cl)
        };
        let mut next_p = &q + &a_t * &pmat * &a_cl;
        crate::linalg::symmetrize(&mut next_p);
        if next_p.iter().any(|v| !v.is_finite()) {
            return Err(IocError::Numerical(format!("Riccati recursion diverged at step {k}")));
        }
        pvec = a_cl.tr_mul(&w);
        pmat = next_p;
        gains.push(Gain {
            free,
            feedback,
            feedforward,
        });
    }
    gains.reverse();

    let mut controls = Vec::with_capacity(horizon + 1);
    let mut x = p.x0.clone();
    for (k, gain) in gains.iter().enumerate() {
        let v = -(&gain.feedback * &x) - &gain.feedforward;
        let mut u = Vector::from_iterator(m, fixed[k].iter().map(|v| v.unwrap_or(0.0)));
        for (j, &i) in gain.free.iter().enumerate() {
            u[i] = v[j];
        }
        x = &p.a * &x + &p.b * &u;
        controls.push(u);
    }
    // The last control only affects its own stage cost.
    controls.push(Vector::from_iterator(
        m,
        fixed[horizon].iter().map(|v| v.unwrap_or(0.0)),
    ));
    Ok(controls)
}

/// Largest violation of `g' (v - u) >= 0` over the vertices `v` of the box:
/// `sum_i max(0, g_i (u_i - l_i), -g_i (h_i - u_i))` with distances capped at 1,
/// so unbounded sides measure the raw gradient.
pub fn variational_residual(cs: &ConstraintSet, u: &Vector, grad: &Vector) -> f64 {
    u.iter()
        .zip(grad.iter())
        .zip(cs.lower().iter().zip(cs.upper().iter()))
        .map(|((u, g), (l, h))| {
            let to_lower = (u - l).min(1.0);
            let to_upper = (h - u).min(1.0);
            (g * to_lower).max(-g * to_upper).max(0.0)
        })
        .sum()
}

fn max_variational_residual(p: &LqProblem, traj: &Trajectory, grads: &[Vector]) -> f64 {
    traj.controls()
        .iter()
        .zip(grads)
        .map(|(u, g)| variational_residual(&p.constraints, u, g))
        .fold(0.0, f64::max)
}

fn feasible(cs: &ConstraintSet, controls: &[Vector]) -> bool {
    controls.iter().all(|u| {
        u.iter()
            .zip(cs.lower().iter().zip(cs.upper().iter()))
            .all(|(v, (l, h))| l <= v && v <= h)
    })
}

/// Optimal trajectory under the box constraints, certified by the
/// variational-inequality residual being at most `opts.tol`.
pub fn solve_box_constrained_lq(p: &LqProblem, opts: &SolverOptions) -> Result<Trajectory> {
    p.validate()?;
    let m = p.control_dim();
    let lower = p.constraints.lower();
    let upper = p.constraints.upper();
    let mut fixed: Fixing = vec![vec![None; m]; p.horizon + 1];
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut best_residual = f64::INFINITY;
    let mut restarted = false;

    for iteration in 0..opts.max_active_set_iterations {
        let controls = riccati_with_fixed(p, &fixed)?;
        let traj = p.rollout(controls)?;
        let grads = p.control_gradients(&traj);
        let residual = max_variational_residual(p, &traj, &grads);
        let is_feasible = feasible(&p.constraints, traj.controls());
        if is_feasible {
            best_residual = best_residual.min(residual);
            if residual <= opts.tol {
                debug!(
                    "active-set solve converged in {} iterations (residual {residual:.3e})",
                    iteration + 1
                );
                return Ok(traj);
            }
        }

        let mut next = fixed.clone();
        for (k, row) in next.iter_mut().enumerate() {
            let u = &traj.controls()[k];
            let g = &grads[k];
            for i in 0..m {
                row[i] = match fixed[k][i] {
                    Some(b) if b == upper[i] => (g[i] <= 0.0).then_some(b),
                    Some(b) => (g[i] >= 0.0).then_some(b),
                    None if u[i] > upper[i] => Some(upper[i]),
                    None if u[i] < lower[i] => Some(lower[i]),
                    None => None,
                };
            }
        }
        let key = signature(&next, upper);
        if next == fixed || !seen.insert(key) {
            if restarted {
                break;
            }
            debug!(
                "active set cycled after {} iterations, running projected gradient",
                iteration + 1
            );
            next = projected_gradient_active_set(p, opts)?;
            seen.clear();
            restarted = true;
        }
        fixed = next;
    }
    Err(IocError::NotConverged {
        iterations: opts.max_active_set_iterations,
        residual: best_residual,
    })
}

fn signature(fixed: &Fixing, upper: &Vector) -> Vec<u8> {
    fixed
        .iter()
        .flat_map(|row| {
            row.iter().enumerate().map(|(i, v)| match v {
                None => 0,
                Some(b) if *b == upper[i] => 2,
                Some(_) => 1,
            })
        })
        .collect()
}

/// Runs accelerated projected gradient and reads off which components sit on a bound.
fn projected_gradient_active_set(p: &LqProblem, opts: &SolverOptions) -> Result<Fixing> {
    let m = p.control_dim();
    let len = p.horizon + 1;
    let cs = &p.constraints;
    let lipschitz = hessian_norm_estimate(p)?;
    let step = 1.0 / lipschitz;
    let project = |us: &[Vector]| us.iter().map(|u| cs.project(u)).collect::<Vec<_>>();

    let mut u = project(&vec![Vector::zeros(m); len]);
    let mut y = u.clone();
    let mut t = 1.0_f64;
    for _ in 0..opts.max_gradient_iterations {
        let traj = p.rollout(y.clone())?;
        let grads = p.control_gradients(&traj);
        let stepped: Vec<Vector> = y.iter().zip(&grads).map(|(y, g)| y - g * step).collect();
        let next = project(&stepped);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = next.iter().zip(&u).map(|(n, o)| n + (n - o) * momentum).collect();
        u = next;
        t = t_next;
        let traj = p.rollout(u.clone())?;
        let grads = p.control_gradients(&traj);
        if max_variational_residual(p, &traj, &grads) <= opts.tol {
            break;
        }
    }
    let width_tol = 1e-9;
    Ok(u.iter()
        .map(|u| {
            (0..m)
                .map(|i| {
                    let (l, h) = (cs.lower()[i], cs.upper()[i]);
                    if u[i] >= h - width_tol * (h - l).min(1.0) {
                        Some(h)
                    } else if u[i] <= l + width_tol * (h - l).min(1.0) {
                        Some(l)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect())
}

/// Power iteration on the objective Hessian (`H v = g(v) - g(0)` with `x0 = 0`).
fn hessian_norm_estimate(p: &LqProblem) -> Result<f64> {
    let m = p.control_dim();
    let len = p.horizon + 1;
    let mut homogeneous = p.clone();
    homogeneous.x0 = Vector::zeros(p.state_dim());
    let mut v: Vec<Vector> = (0..len)
        .map(|k| Vector::from_element(m, 1.0 + (k % 3) as f64))
        .collect();
    let mut estimate = 1.0;
    for _ in 0..60 {
        let norm = v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let traj = homogeneous.rollout(v.clone())?;
        v = homogeneous.control_gradients(&traj);
        estimate = v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    }
    Ok(estimate * 1.05)
}

/// Costates `lambda_0 ..= lambda_{K+1}` from the backward recursion with `lambda_{K+1} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Costates {
    pub lambdas: Vec<Vector>,
}

pub fn backward_costates(model: &ProblemModel, traj: &Trajectory, theta: &Vector) -> Result<Costates> {
    check_theta(model, theta)?;
    let n = model.state_dim();
    let k_final = traj.horizon();
    let mut lambdas = vec![Vector::zeros(n); k_final + 2];
    for k in (0..=k_final).rev() {
        let (x, u) = (&traj.states()[k], &traj.controls()[k]);
        lambdas[k] = model.basis_jac_x(k, x, u)? * theta + model.dynamics_jac_x(k, x, u)? * &lambdas[k + 1];
    }
    Ok(Costates { lambdas })
}

/// Costates `lambda_0 ..= lambda_{K+1}` propagated forward from `lambda_0`:
/// `lambda_{k+1} = J_k^{-1} (lambda_k - dL/dx theta)`.
pub fn forward_costates(
    model: &ProblemModel,
    traj: &Trajectory,
    theta: &Vector,
    lambda0: &Vector,
) -> Result<Vec<Vector>> {
    check_theta(model, theta)?;
    if lambda0.len() != model.state_dim() {
        return Err(IocError::dims("initial costate", model.state_dim(), lambda0.len()));
    }
    let mut lambdas = Vec::with_capacity(traj.len() + 1);
    lambdas.push(lambda0.clone());
    for (k, (x, u)) in traj.pairs().enumerate() {
        let jx = model.dynamics_jac_x(k, x, u)?;
        let rcond = crate::model::reciprocal_condition(&jx);
        if !(rcond > crate::model::SINGULARITY_TOL) {
            return Err(IocError::AssumptionViolated { k, rcond });
        }
        let rhs = &lambdas[k] - model.basis_jac_x(k, x, u)? * theta;
        let next = jx.lu().solve(&rhs).ok_or(IocError::AssumptionViolated { k, rcond })?;
        lambdas.push(next);
    }
    Ok(lambdas)
}

fn check_theta(model: &ProblemModel, theta: &Vector) -> Result<()> {
    if theta.len() != model.basis_dim() {
        return Err(IocError::dims("parameter vector", model.basis_dim(), theta.len()));
    }
    Ok(())
}

/// Minimum-principle diagnostics for a trajectory under a candidate `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimumPrincipleReport {
    /// Largest `|dH/du|` over times with an interior control.
    pub max_stationarity: f64,
    /// Largest variational-inequality residual over times with a boundary control.
    pub max_variational_violation: f64,
    /// `max_k |forward_k - backward_k| / max_k |backward_k|` for the costates.
    pub costate_mismatch: f64,
    pub dynamics_mismatch: f64,
    pub costates: Costates,
}

pub fn verify_minimum_principle(
    model: &ProblemModel,
    cs: &ConstraintSet,
    traj: &Trajectory,
    theta: &Vector,
) -> Result<MinimumPrincipleReport> {
    if cs.dim() != model.control_dim() {
        return Err(IocError::dims("constraint set", model.control_dim(), cs.dim()));
    }
    let costates = backward_costates(model, traj, theta)?;
    let mut max_stationarity = 0.0_f64;
    let mut max_variational_violation = 0.0_f64;
    for (k, (x, u)) in traj.pairs().enumerate() {
        let grad = model.basis_jac_u(k, x, u)? * theta + model.dynamics_jac_u(k, x, u)? * &costates.lambdas[k + 1];
        if cs.is_interior(u)? {
            max_stationarity = max_stationarity.max(grad.norm());
        } else {
            max_variational_violation = max_variational_violation.max(variational_residual(cs, u, &grad));
        }
    }
    let forward = forward_costates(model, traj, theta, &costates.lambdas[0])?;
    let scale = costates.lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let diff = forward
        .iter()
        .zip(&costates.lambdas)
        .map(|(f, b)| (f - b).norm())
        .fold(0.0, f64::max);
    let costate_mismatch = if scale > 0.0 { diff / scale } else { diff };
    Ok(MinimumPrincipleReport {
        max_stationarity,
        max_variational_violation,
        costate_mismatch,
        dynamics_mismatch: traj.dynamics_mismatch(model)?,
        costates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn integrator(x0: f64, horizon: usize, weights: (f64, f64), delta: f64) -> LqProblem {
        LqProblem {
            a: dmatrix![1.0],
            b: dmatrix![1.0],
            state_weights: dvector![weights.0],
            control_weights: dvector![weights.1],
            x0: dvector![x0],
            horizon,
            constraints: ConstraintSet::symmetric(1, delta).unwrap(),
        }
    }

    #[test]
    fn single_integrator_matches_printed_values() {
        let traj = solve_unconstrained_lq(&integrator(10.0, 10, (1.0, 5.0), f64::INFINITY)).unwrap();
        assert!((traj.controls()[0][0] + 3.58).abs() < 5e-3);
        assert!((traj.controls()[1][0] + 2.30).abs() < 5e-3);
        assert!((traj.states()[1][0] - 6.42).abs() < 5e-3);
        assert_eq!(traj.controls()[10][0], 0.0);
    }

    #[test]
    fn zero_initial_state_gives_zero_trajectory() {
        let traj = solve_unconstrained_lq(&integrator(0.0, 5, (1.0, 5.0), f64::INFINITY)).unwrap();
        assert!(traj.states().iter().chain(traj.controls()).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn two_step_problem_matches_analytic_minimiser() {
        // K = 1: cost x0^2 + u0^2 + (x0 + u0)^2 + u1^2 is minimised by u0 = -x0/2, u1 = 0.
        let traj = solve_unconstrained_lq(&integrator(1.0, 1, (1.0, 1.0), f64::INFINITY)).unwrap();
        assert!((traj.controls()[0][0] + 0.5).abs() < 1e-14);
        assert_eq!(traj.controls()[1][0], 0.0);
        // Dense grid confirms it.
        let cost = |u0: f64| 1.0 + u0 * u0 + (1.0 + u0).powi(2);
        let best = (0..=20_000)
            .map(|i| -2.0 + 4.0 * i as f64 / 20_000.0)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap();
        assert!((best + 0.5).abs() <= 2e-4);
    }

    #[test]
    fn unconstrained_solution_is_stationary() {
        let p = integrator(10.0, 10, (1.0, 5.0), f64::INFINITY);
        let traj = solve_unconstrained_lq(&p).unwrap();
        let grads = p.control_gradients(&traj);
        assert!(grads.iter().all(|g| g.norm() <= 1e-9));
    }

    #[test]
    fn wide_box_matches_unconstrained() {
        let free = solve_unconstrained_lq(&integrator(10.0, 10, (1.0, 5.0), f64::INFINITY)).unwrap();
        let boxed =
            solve_box_constrained_lq(&integrator(10.0, 10, (1.0, 5.0), 100.0), &SolverOptions::default()).unwrap();
        for (a, b) in free.controls().iter().zip(boxed.controls()) {
            assert!((a - b).norm() <= 1e-6);
        }
    }

    #[test]
    fn tight_box_saturates_early_controls() {
        let p = integrator(10.0, 20, (1.0, 5.0), 1.0);
        let traj = solve_box_constrained_lq(&p, &SolverOptions::default()).unwrap();
        assert_eq!(traj.controls()[0][0], -1.0);
        let grads = p.control_gradients(&traj);
        assert!(max_variational_residual(&p, &traj, &grads) <= 1e-8);
        let free = solve_unconstrained_lq(&integrator(10.0, 20, (1.0, 5.0), f64::INFINITY)).unwrap();
        assert!(p.objective(&traj) >= p.objective(&free));
    }

    #[test]
    fn minimum_principle_holds_for_true_weights_only() {
        let p = integrator(10.0, 10, (1.0, 5.0), f64::INFINITY);
        let traj = solve_unconstrained_lq(&p).unwrap();
        let model = p.model().unwrap();
        let good = verify_minimum_principle(&model, &p.constraints, &traj, &dvector![1.0, 5.0]).unwrap();
        assert!(good.max_stationarity <= 1e-8);
        assert!(good.costate_mismatch <= 1e-8);
        let bad = verify_minimum_principle(&model, &p.constraints, &traj, &dvector![1.0, 1.0]).unwrap();
        assert!(bad.max_stationarity > 1e-3);
    }

    #[test]
    fn zero_trajectory_satisfies_minimum_principle_for_any_theta() {
        let p = integrator(0.0, 6, (1.0, 5.0), f64::INFINITY);
        let traj = solve_unconstrained_lq(&p).unwrap();
        let model = p.model().unwrap();
        let r = verify_minimum_principle(&model, &p.constraints, &traj, &dvector![3.0, 0.2]).unwrap();
        assert_eq!(r.max_stationarity, 0.0);
        assert_eq!(r.costates.lambdas.len(), 8);
    }

    #[test]
    fn variational_residual_signs() {
        let cs = ConstraintSet::symmetric(1, 1.0).unwrap();
        // At the upper bound a negative gradient (wants to increase) is fine.
        assert_eq!(variational_residual(&cs, &dvector![1.0], &dvector![-3.0]), 0.0);
        assert_eq!(variational_residual(&cs, &dvector![1.0], &dvector![3.0]), 3.0);
        assert_eq!(variational_residual(&cs, &dvector![0.0], &dvector![0.0]), 0.0);
        assert!((variational_residual(&cs, &dvector![0.5], &dvector![-2.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let mut p = integrator(1.0, 3, (1.0, 1.0), 1.0);
        p.control_weights = dvector![0.0];
        assert!(p.validate().is_err());
        let mut p = integrator(1.0, 3, (1.0, 1.0), 1.0);
        p.horizon = 0;
        assert!(solve_unconstrained_lq(&p).is_err());
    }
}
