//! Online inverse optimal control.
//!
//! Each incoming pair `(x_k, u_k)` is folded into a constant-size state: the
//! running product `T_k = G_k T_{k-1}` of costate transition matrices, and the
//! information matrix `Q_k = Q_{k-1} + (F_k T_k)'(F_k T_k)`, where the update
//! is skipped whenever `u_k` touches the constraint boundary. The unknown vector
//! `alpha = [theta; lambda_0]` minimises `alpha' Q_k alpha` subject to the pinned
//! parameter, which has a closed form once the trailing block of `Q_k` is
//! nonsingular.
//!
//! `Q_k` is kept in square-root form, an upper triangular `R_k` with
//! `R_k' R_k = Q_k`, updated by a QR factorization of `[R_{k-1}; F_k T_k]`.
//! The transition product grows geometrically for stable dynamics, and forming
//! `Q_k` explicitly would square its condition number.
//!
//! Information only accumulates, so the reported rank never decreases: the
//! state remembers the highest rank reached, and a relative cutoff that drifts
//! up with the largest singular value cannot revoke it.
//!
//! Nothing about the horizon is needed and no past pair is retained.

use log::{debug, warn};
use nalgebra::SymmetricEigen;

use crate::error::{IocError, Result};
use crate::linalg;
use crate::model::{
    reciprocal_condition, ConstraintSet, Matrix, ParameterNormalization, ProblemModel, Trajectory, Vector,
    SINGULARITY_TOL,
};

/// Tuning knobs for [`OnlineEstimator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Singular values of the trailing information block at or below
    /// `rank_tol * sigma_max` are treated as zero. The block is first scaled
    /// symmetrically to unit diagonal, and its singular values are taken as
    /// squares of those of the scaled square-root factor, so values down to
    /// about `1e-15` are resolved.
    pub rank_tol: f64,
    /// Report the minimum-norm solution when the trailing block is rank deficient.
    pub pseudoinverse_fallback: bool,
    /// Log a warning once the transition product's condition estimate exceeds this.
    pub conditioning_warn: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            rank_tol: 3e-13,
            pseudoinverse_fallback: false,
            conditioning_warn: 1e12,
        }
    }
}

/// `F_k = [dL/du | df/du]`, shape `m x (N + n)`.
pub fn compute_f(model: &ProblemModel, k: usize, x: &Vector, u: &Vector) -> Result<Matrix> {
    model.check_point(x, u)?;
    let lu = model.basis_jac_u(k, x, u)?;
    let fu = model.dynamics_jac_u(k, x, u)?;
    let (m, big_n, n) = (model.control_dim(), model.basis_dim(), model.state_dim());
    let mut f = Matrix::zeros(m, big_n + n);
    f.view_mut((0, 0), (m, big_n)).copy_from(&lu);
    f.view_mut((0, big_n), (m, n)).copy_from(&fu);
    Ok(f)
}

/// The costate transition `[theta; lambda_k] -> [theta; lambda_{k+1}]`:
/// `G_k = [[I, 0], [-J^{-1} dL/dx, J^{-1}]]` with `J` the state Jacobian of the dynamics.
pub fn compute_g(model: &ProblemModel, k: usize, x: &Vector, u: &Vector) -> Result<Matrix> {
    Ok(transition_pair(model, k, x, u)?.0)
}

/// `G_k` together with its inverse `[[I, 0], [dL/dx, J]]`.
fn transition_pair(model: &ProblemModel, k: usize, x: &Vector, u: &Vector) -> Result<(Matrix, Matrix)> {
    model.check_point(x, u)?;
    let jx = model.dynamics_jac_x(k, x, u)?;
    let lx = model.basis_jac_x(k, x, u)?;
    let rcond = reciprocal_condition(&jx);
    if !(rcond > SINGULARITY_TOL) {
        return Err(IocError::AssumptionViolated { k, rcond });
    }
    let lu = jx.clone().lu();
    let n = model.state_dim();
    let big_n = model.basis_dim();
    let jx_inv = lu
        .solve(&Matrix::identity(n, n))
        .ok_or(IocError::AssumptionViolated { k, rcond })?;
    let jx_inv_lx = lu.solve(&lx).ok_or(IocError::AssumptionViolated { k, rcond })?;

    let dim = big_n + n;
    let mut g = Matrix::identity(dim, dim);
    g.view_mut((big_n, 0), (n, big_n)).copy_from(&(-jx_inv_lx));
    g.view_mut((big_n, big_n), (n, n)).copy_from(&jx_inv);

    let mut g_inv = Matrix::identity(dim, dim);
    g_inv.view_mut((big_n, 0), (n, big_n)).copy_from(&lx);
    g_inv.view_mut((big_n, big_n), (n, n)).copy_from(&jx);
    Ok((g, g_inv))
}

/// Recursion state. Its size depends only on `(n, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    next_index: usize,
    processed: usize,
    transition: Matrix,
    inverse_transition: Matrix,
    factor: Matrix,
    inactive_count: usize,
    condition_estimate: f64,
    conditioning_warned: bool,
    rank_floor: usize,
}

impl EstimatorState {
    /// State before any pair has been processed; the first pair is time 0.
    pub fn new(state_dim: usize, basis_dim: usize) -> Self {
        Self::starting_at(0, state_dim, basis_dim)
    }

    /// State whose first processed pair is treated as time `first_index`.
    pub fn starting_at(first_index: usize, state_dim: usize, basis_dim: usize) -> Self {
        let dim = state_dim + basis_dim;
        EstimatorState {
            next_index: first_index,
            processed: 0,
            transition: Matrix::identity(dim, dim),
            inverse_transition: Matrix::identity(dim, dim),
            factor: Matrix::zeros(dim, dim),
            inactive_count: 0,
            condition_estimate: 1.0,
            conditioning_warned: false,
            rank_floor: 0,
        }
    }

    /// Time index of the most recently processed pair.
    pub fn last_index(&self) -> Option<usize> {
        (self.processed > 0).then(|| self.next_index - 1)
    }

    pub fn processed(&self) -> usize {
        self.processed
    }

    /// Running product of transition matrices.
    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    /// Accumulated information matrix `Q_k = R_k' R_k`.
    pub fn information(&self) -> Matrix {
        self.factor.tr_mul(&self.factor)
    }

    /// Upper triangular square root `R_k` of the information matrix.
    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    /// Number of processed pairs whose control was interior.
    pub fn inactive_count(&self) -> usize {
        self.inactive_count
    }

    /// 1-norm condition estimate of the transition product.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Number of floating-point values held by the state.
    pub fn element_count(&self) -> usize {
        self.transition.len() + self.inverse_transition.len() + self.factor.len() + 1
    }
}

/// What the estimator reports after processing one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub k: usize,
    /// `None` when the trailing information block is rank deficient and the
    /// pseudoinverse fallback is off.
    pub theta_hat: Option<Vector>,
    pub lambda0_hat: Option<Vector>,
    /// `[theta; lambda_0]`; the minimum-norm minimiser when not unique.
    pub alpha_hat: Vector,
    pub qbar_rank: usize,
    pub unique: bool,
    pub residual: f64,
    /// `sigma_max / sigma_min` of the trailing information block (infinite if singular).
    pub qbar_condition: f64,
}

/// Output of [`solve_parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSolution {
    pub alpha: Vector,
    pub qbar_rank: usize,
    pub unique: bool,
    pub qbar_condition: f64,
}

const NEAR_SINGULAR_WARN: f64 = 1e12;

/// Minimises `alpha' Q alpha` subject to `alpha[pinned] = a`.
///
/// With the pinned coordinate moved to the front, `Q = [[q11, q'], [q, Qbar]]`
/// and the minimiser is `[a; -a Qbar^{-1} q]` when `Qbar` has full numerical
/// rank. Otherwise the minimum-norm solution via the pseudoinverse is returned
/// and `unique` is false. See [`EstimatorOptions::rank_tol`] for the rank rule.
///
/// `Q` must be positive semidefinite; negative eigenvalues are treated as zero.
pub fn solve_parameters(q: &Matrix, norm: &ParameterNormalization, rank_tol: f64) -> Result<ParameterSolution> {
    if !q.is_square() || q.nrows() < 2 {
        return Err(IocError::dims(
            "information matrix",
            "square, size >= 2",
            format!("{}x{}", q.nrows(), q.ncols()),
        ));
    }
    let mut sym = q.clone();
    linalg::symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let factor = Matrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    solve_factored(&factor, norm, rank_tol)
}

/// Same as [`solve_parameters`] given any `R` with `R' R = Q`.
pub fn solve_factored(r: &Matrix, norm: &ParameterNormalization, rank_tol: f64) -> Result<ParameterSolution> {
    solve_with_rank_floor(r, norm, rank_tol, 0)
}

/// As [`solve_factored`], but the rank is never reported below `rank_floor`.
fn solve_with_rank_floor(
    r: &Matrix,
    norm: &ParameterNormalization,
    rank_tol: f64,
    rank_floor: usize,
) -> Result<ParameterSolution> {
    let dim = r.ncols();
    if dim < 2 {
        return Err(IocError::dims("information factor", "at least 2 columns", dim));
    }
    norm.check(dim)?;
    let p = norm.pinned();
    let a = norm.value();

    // Columns of R other than the pinned one, scaled to unit norm.
    let rest: Vec<usize> = (0..dim).filter(|&c| c != p).collect();
    let scale: Vec<f64> = rest
        .iter()
        .map(|&c| {
            let norm = r.column(c).norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    let scaled = Matrix::from_fn(r.nrows(), dim - 1, |i, j| r[(i, rest[j])] * scale[j]);
    let rhs = r.column(p) * (-a);

    let svd = scaled.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    // Singular values of Qbar are the squares of those of its factor.
    let cutoff = rank_tol.sqrt() * max;
    let numerical_rank = if max > 0.0 {
        svd.singular_values.iter().filter(|&&v| v > cutoff).count()
    } else {
        0
    };
    let qbar_rank = numerical_rank.max(rank_floor).min(dim - 1);
    let qbar_condition = if min > 0.0 { (max / min).powi(2) } else { f64::INFINITY };
    let unique = qbar_rank == dim - 1;
    if unique && qbar_condition > NEAR_SINGULAR_WARN {
        debug!("trailing information block is nearly singular (scaled condition {qbar_condition:.3e})");
    }

    let scaled_beta = if unique {
        least_squares_qr(scaled, &rhs)
    } else {
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested V'");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let mut coeffs = u.tr_mul(&rhs);
        for (position, &i) in order.iter().enumerate() {
            let s = svd.singular_values[i];
            coeffs[i] = if position < qbar_rank && s > 0.0 {
                coeffs[i] / s
            } else {
                0.0
            };
        }
        v_t.tr_mul(&coeffs)
    };

    let mut alpha = Vector::zeros(dim);
    alpha[p] = a;
    for (j, &c) in rest.iter().enumerate() {
        alpha[c] = scaled_beta[j] * scale[j];
    }
    Ok(ParameterSolution {
        alpha,
        qbar_rank,
        unique,
        qbar_condition,
    })
}

/// Least-squares solution of a tall full-column-rank system via Householder QR.
fn least_squares_qr(a: Matrix, b: &Vector) -> Vector {
    let cols = a.ncols();
    let qr = a.qr();
    let qtb = qr.q().tr_mul(b);
    let r = qr.r();
    let mut x = qtb.rows(0, cols).into_owned();
    for j in (0..cols).rev() {
        let mut v = x[j];
        for i in (j + 1)..cols {
            v -= r[(j, i)] * x[i];
        }
        x[j] = v / r[(j, j)];
    }
    x
}

/// `alpha' Q alpha`, with tiny negative round-off clamped to zero.
pub fn residual(q: &Matrix, alpha: &Vector) -> f64 {
    let v = alpha.dot(&(q * alpha));
    if v >= 0.0 {
        return v;
    }
    let guard = 1e-12 * q.norm() * alpha.norm_squared();
    if v < -guard {
        warn!("negative quadratic form {v:.3e}: information matrix is not positive semidefinite");
    }
    0.0
}

/// Online estimator bound to a model, constraint set and normalization.
#[derive(Debug, Clone)]
pub struct OnlineEstimator {
    model: ProblemModel,
    constraints: ConstraintSet,
    normalization: ParameterNormalization,
    options: EstimatorOptions,
}

impl OnlineEstimator {
    pub fn new(
        model: ProblemModel,
        constraints: ConstraintSet,
        normalization: ParameterNormalization,
        options: EstimatorOptions,
    ) -> Result<Self> {
        if constraints.dim() != model.control_dim() {
            return Err(IocError::dims("constraint set", model.control_dim(), constraints.dim()));
        }
        normalization.check(model.basis_dim())?;
        if !(options.rank_tol > 0.0) {
            return Err(IocError::InvalidArgument(format!(
                "rank tolerance must be positive, got {}",
                options.rank_tol
            )));
        }
        Ok(OnlineEstimator {
            model,
            constraints,
            normalization,
            options,
        })
    }

    pub fn model(&self) -> &ProblemModel {
        &self.model
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn normalization(&self) -> &ParameterNormalization {
        &self.normalization
    }

    pub fn options(&self) -> &EstimatorOptions {
        &self.options
    }

    pub fn initial_state(&self) -> EstimatorState {
        EstimatorState::new(self.model.state_dim(), self.model.basis_dim())
    }

    /// Processes one pair and returns the updated state with the estimate at that time.
    pub fn step(&self, mut state: EstimatorState, x: &Vector, u: &Vector) -> Result<(EstimatorState, EstimateResult)> {
        let k = state.next_index;
        let dim = self.model.state_dim() + self.model.basis_dim();
        if state.factor.nrows() != dim {
            return Err(IocError::dims("estimator state", dim, state.factor.nrows()));
        }
        let interior = self.constraints.is_interior(u)?;
        let (g, g_inv) = transition_pair(&self.model, k, x, u)?;
        let f = compute_f(&self.model, k, x, u)?;

        state.transition = &g * &state.transition;
        state.inverse_transition = &state.inverse_transition * &g_inv;
        if interior {
            let fg = &f * &state.transition;
            let mut stacked = Matrix::zeros(dim + fg.nrows(), dim);
            stacked.view_mut((0, 0), (dim, dim)).copy_from(&state.factor);
            stacked.view_mut((dim, 0), (fg.nrows(), dim)).copy_from(&fg);
            state.factor = stacked.qr().r();
            state.inactive_count += 1;
        }
        state.condition_estimate = norm1(&state.transition) * norm1(&state.inverse_transition);
        if state.condition_estimate > self.options.conditioning_warn && !state.conditioning_warned {
            warn!(
                "transition product is ill-conditioned at k = {k} (estimate {:.3e})",
                state.condition_estimate
            );
            state.conditioning_warned = true;
        }
        state.next_index += 1;
        state.processed += 1;

        let result = self.estimate(&state, k)?;
        state.rank_floor = result.qbar_rank;
        Ok((state, result))
    }

    /// Solves for the estimate implied by `state` (time index `k` is only recorded).
    fn estimate(&self, state: &EstimatorState, k: usize) -> Result<EstimateResult> {
        let sol = solve_with_rank_floor(
            &state.factor,
            &self.normalization,
            self.options.rank_tol,
            state.rank_floor,
        )?;
        let residual = (&state.factor * &sol.alpha).norm_squared();
        let big_n = self.model.basis_dim();
        let n = self.model.state_dim();
        let report = sol.unique || self.options.pseudoinverse_fallback;
        Ok(EstimateResult {
            k,
            theta_hat: report.then(|| sol.alpha.rows(0, big_n).into_owned()),
            lambda0_hat: report.then(|| sol.alpha.rows(big_n, n).into_owned()),
            alpha_hat: sol.alpha,
            qbar_rank: sol.qbar_rank,
            unique: sol.unique,
            residual,
            qbar_condition: sol.qbar_condition,
        })
    }

    /// Runs the recursion over a whole trajectory, one result per pair.
    pub fn run(&self, trajectory: &Trajectory) -> Result<Vec<EstimateResult>> {
        self.run_from(trajectory, 0)
    }

    /// Runs the recursion starting fresh at time `start`, ignoring earlier pairs.
    pub fn run_from(&self, trajectory: &Trajectory, start: usize) -> Result<Vec<EstimateResult>> {
        let mut state = EstimatorState::starting_at(start, self.model.state_dim(), self.model.basis_dim());
        let mut out = Vec::with_capacity(trajectory.len().saturating_sub(start));
        for (offset, (x, u)) in trajectory.suffix(start).enumerate() {
            let (next, result) = self.step(state, x, u).map_err(|e| e.at_step(start + offset))?;
            state = next;
            out.push(result);
        }
        Ok(out)
    }

    /// Like [`run`](Self::run) but keeps only the final state and estimate.
    pub fn run_final(&self, trajectory: &Trajectory) -> Result<(EstimatorState, EstimateResult)> {
        let mut state = self.initial_state();
        let mut last = None;
        for (k, (x, u)) in trajectory.pairs().enumerate() {
            let (next, result) = self.step(state, x, u).map_err(|e| e.at_step(k))?;
            state = next;
            last = Some(result);
        }
        let last = last.ok_or_else(|| IocError::InvalidArgument("empty trajectory".into()))?;
        Ok((state, last))
    }
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Time index of the first unique estimate in a run.
pub fn first_unique(results: &[EstimateResult]) -> Option<usize> {
    results.iter().find(|r| r.unique).map(|r| r.k)
}
