//! Offline whole-trajectory baseline.
//!
//! All costates `lambda_0..lambda_{K+1}` become unknowns next to `theta`. The
//! stacked system holds, for every `k`, the costate equation
//! `lambda_k - dL/dx theta - df/dx lambda_{k+1} = 0` and, at inactive times
//! only, stationarity `dL/du theta + df/du lambda_{k+1} = 0`. The pinned
//! parameter and the terminal costate `lambda_{K+1} = 0` are substituted out,
//! and the remaining least-squares problem is solved through its dense normal
//! equations. The cost therefore grows cubically with the horizon, which is
//! the point of the comparison.

use std::time::Instant;

use log::debug;
use nalgebra::SymmetricEigen;

use crate::error::{IocError, Result};
use crate::estimator::{EstimateResult, EstimatorOptions, OnlineEstimator};
use crate::forward::{solve_box_constrained_lq, solve_unconstrained_lq, LqProblem, SolverOptions};
use crate::linalg;
use crate::model::{
    reciprocal_condition, ConstraintSet, Matrix, ParameterNormalization, ProblemModel, Trajectory, Vector,
    SINGULARITY_TOL,
};

/// Relative pivot floor for the normal-equation Cholesky factor.
const PIVOT_TOL: f64 = 1e-14;
/// Relative singular-value cutoff when the factorization breaks down.
const RANK_TOL: f64 = 1e-8;

/// One sparse row: `(column, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// The stacked minimum-principle equations for a whole trajectory.
///
/// Columns are ordered `[theta (N); lambda_0 (n); ...; lambda_{K+1} (n)]`; every
/// row has a zero right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSystem {
    rows: Vec<SparseRow>,
    state_dim: usize,
    basis_dim: usize,
    horizon: usize,
    inactive_steps: usize,
}

impl BatchSystem {
    pub fn build(model: &ProblemModel, cs: &ConstraintSet, traj: &Trajectory) -> Result<Self> {
        if cs.dim() != model.control_dim() {
            return Err(IocError::dims("constraint set", model.control_dim(), cs.dim()));
        }
        let n = model.state_dim();
        let m = model.control_dim();
        let big_n = model.basis_dim();
        let lambda = |j: usize| big_n + j * n;

        let mut rows = Vec::with_capacity((n + m) * traj.len());
        let mut inactive_steps = 0;
        for (k, (x, u)) in traj.pairs().enumerate() {
            let mut step = || -> Result<()> {
                model.check_point(x, u)?;
                let fx = model.dynamics_jac_x(k, x, u)?;
                let rcond = reciprocal_condition(&fx);
                if !(rcond > SINGULARITY_TOL) {
                    return Err(IocError::AssumptionViolated { k, rcond });
                }
                let lx = model.basis_jac_x(k, x, u)?;
                for i in 0..n {
                    let mut row = vec![(lambda(k) + i, 1.0)];
                    row.extend((0..big_n).filter(|&c| lx[(i, c)] != 0.0).map(|c| (c, -lx[(i, c)])));
                    row.extend(
                        (0..n)
                            .filter(|&j| fx[(i, j)] != 0.0)
                            .map(|j| (lambda(k + 1) + j, -fx[(i, j)])),
                    );
                    rows.push(row);
                }
                if cs.is_interior(u)? {
                    let lu = model.basis_jac_u(k, x, u)?;
                    let fu = model.dynamics_jac_u(k, x, u)?;
                    for i in 0..m {
                        let mut row: SparseRow = (0..big_n)
                            .filter(|&c| lu[(i, c)] != 0.0)
                            .map(|c| (c, lu[(i, c)]))
                            .collect();
                        row.extend(
                            (0..n)
                                .filter(|&j| fu[(i, j)] != 0.0)
                                .map(|j| (lambda(k + 1) + j, fu[(i, j)])),
                        );
                        rows.push(row);
                    }
                    inactive_steps += 1;
                }
                Ok(())
            };
            step().map_err(|e| e.at_step(k))?;
        }
        Ok(BatchSystem {
            rows,
            state_dim: n,
            basis_dim: big_n,
            horizon: traj.horizon(),
            inactive_steps,
        })
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Length of the decision vector, `N + n (K + 2)`.
    pub fn ncols(&self) -> usize {
        self.basis_dim + self.state_dim * (self.horizon + 2)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn inactive_steps(&self) -> usize {
        self.inactive_steps
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.nrows(), self.ncols());
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[(r, c)] += v;
            }
        }
        out
    }

    /// Maps full columns to reduced ones after removing the pinned parameter
    /// and the terminal costate.
    fn reduced_columns(&self, pinned: usize) -> (Vec<Option<usize>>, usize) {
        let terminal = self.basis_dim + self.state_dim * (self.horizon + 1);
        let mut map = vec![None; self.ncols()];
        let mut next = 0;
        for (c, slot) in map.iter_mut().enumerate() {
            if c != pinned && c < terminal {
                *slot = Some(next);
                next += 1;
            }
        }
        (map, next)
    }
}

struct Reduced<'a> {
    system: &'a BatchSystem,
    map: Vec<Option<usize>>,
    dim: usize,
    pinned: usize,
    value: f64,
}

impl Reduced<'_> {
    /// Right-hand side of one row once the pinned parameter is moved across.
    fn rhs(&self, row: &SparseRow) -> f64 {
        -self.value
            * row
                .iter()
                .filter(|(c, _)| *c == self.pinned)
                .map(|(_, v)| v)
                .sum::<f64>()
    }

    /// Lower triangle of `A' A` and `A' b` for the reduced system.
    fn normal_equations(&self) -> (Matrix, Vector) {
        let mut ata = Matrix::zeros(self.dim, self.dim);
        let mut atb = Vector::zeros(self.dim);
        let mut cols: Vec<(usize, f64)> = Vec::new();
        for row in &self.system.rows {
            cols.clear();
            cols.extend(row.iter().filter_map(|&(c, v)| self.map[c].map(|r| (r, v))));
            let b = self.rhs(row);
            for &(i, vi) in &cols {
                atb[i] += vi * b;
                for &(j, vj) in &cols {
                    if j <= i {
                        ata[(i, j)] += vi * vj;
                    }
                }
            }
        }
        (ata, atb)
    }

    /// `A' (b - A z)` and `|b - A z|^2`.
    fn residual(&self, z: &Vector) -> (Vector, f64) {
        let mut grad = Vector::zeros(self.dim);
        let mut sq = 0.0;
        for row in &self.system.rows {
            let mut r = self.rhs(row);
            for &(c, v) in row {
                if let Some(i) = self.map[c] {
                    r -= v * z[i];
                }
            }
            sq += r * r;
            for &(c, v) in row {
                if let Some(i) = self.map[c] {
                    grad[i] += v * r;
                }
            }
        }
        (grad, sq)
    }
}

/// Solves the stacked least-squares problem with `theta[pinned] = a`.
///
/// The estimate is unique when the reduced normal matrix is positive definite.
/// Otherwise `theta_hat` and `lambda0_hat` are `None` and `alpha_hat` holds the
/// minimum-norm solution. `qbar_rank` reports the rank of the reduced normal
/// matrix and `qbar_condition` a diagonal-pivot estimate of its condition number.
pub fn batch_estimate(
    model: &ProblemModel,
    cs: &ConstraintSet,
    norm: &ParameterNormalization,
    traj: &Trajectory,
) -> Result<EstimateResult> {
    norm.check(model.basis_dim())?;
    let system = BatchSystem::build(model, cs, traj)?;
    solve_system(&system, norm)
}

/// Solves an already assembled [`BatchSystem`]; see [`batch_estimate`].
pub fn solve_system(system: &BatchSystem, norm: &ParameterNormalization) -> Result<EstimateResult> {
    norm.check(system.basis_dim)?;
    let (map, dim) = system.reduced_columns(norm.pinned());
    let reduced = Reduced {
        system,
        map,
        dim,
        pinned: norm.pinned(),
        value: norm.value(),
    };

    let (mut factor, atb) = reduced.normal_equations();
    let (z, rank, condition) = match linalg::cholesky_in_place(&mut factor, PIVOT_TOL) {
        Ok(()) => {
            let mut z = linalg::cholesky_solve(&factor, &atb);
            let (correction, _) = reduced.residual(&z);
            z += linalg::cholesky_solve(&factor, &correction);
            let diag = factor.diagonal();
            let condition = (diag.max() / diag.min()).powi(2);
            (z, dim, condition)
        }
        Err(col) => {
            debug!("batch normal matrix is singular at column {col}, using eigendecomposition");
            drop(factor);
            let (mut ata, atb) = reduced.normal_equations();
            fill_upper(&mut ata);
            min_norm_solve(ata, &atb)
        }
    };
    let (_, residual) = reduced.residual(&z);

    let big_n = system.basis_dim;
    let n = system.state_dim;
    let mut alpha = Vector::zeros(big_n + n);
    for (c, slot) in alpha.iter_mut().enumerate() {
        *slot = match reduced.map[c] {
            Some(i) => z[i],
            None => norm.value(),
        };
    }
    let unique = rank == dim;
    Ok(EstimateResult {
        k: system.horizon,
        theta_hat: unique.then(|| alpha.rows(0, big_n).into_owned()),
        lambda0_hat: unique.then(|| alpha.rows(big_n, n).into_owned()),
        alpha_hat: alpha,
        qbar_rank: rank,
        unique,
        residual,
        qbar_condition: condition,
    })
}

fn fill_upper(m: &mut Matrix) {
    for j in 0..m.ncols() {
        for i in 0..j {
            m[(i, j)] = m[(j, i)];
        }
    }
}

fn min_norm_solve(ata: Matrix, atb: &Vector) -> (Vector, usize, f64) {
    let eig = SymmetricEigen::new(ata);
    let max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    // Eigenvalues of A'A are squared singular values of A.
    let cutoff = (RANK_TOL * RANK_TOL * max).max(f64::MIN_POSITIVE);
    let coeffs = eig.eigenvectors.tr_mul(atb);
    let mut rank = 0;
    let mut scaled = Vector::zeros(coeffs.len());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            scaled[i] = coeffs[i] / lambda;
            rank += 1;
        }
    }
    (&eig.eigenvectors * scaled, rank, f64::INFINITY)
}

/// One row of [`timing_comparison`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub horizon: usize,
    pub online_total_s: f64,
    pub online_per_step_s: f64,
    pub batch_s: f64,
    /// Number of matrix entries held by the online recursion state.
    pub online_state_elems: usize,
    /// Length of the batch decision vector.
    pub batch_var_count: usize,
    pub online_theta: Option<Vector>,
    pub batch_theta: Option<Vector>,
}

/// Generates the optimal trajectory of `problem` at each horizon and times the
/// online recursion against the batch solve.
///
/// Short runs are repeated until at least `MIN_TIMED` has elapsed and averaged.
pub fn timing_comparison(
    problem: &LqProblem,
    norm: &ParameterNormalization,
    horizons: &[usize],
) -> Result<Vec<TimingRow>> {
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IocError::InvalidArgument("horizons must be strictly increasing".into()));
    }
    let model = problem.model()?;
    let estimator = OnlineEstimator::new(
        model.clone(),
        problem.constraints.clone(),
        *norm,
        EstimatorOptions::default(),
    )?;
    let mut out = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let p = LqProblem {
            horizon,
            ..problem.clone()
        };
        let traj = if p.constraints.is_bounded() {
            solve_box_constrained_lq(&p, &SolverOptions::default())?
        } else {
            solve_unconstrained_lq(&p)?
        };

        let (online_total_s, (state, online)) = timed(|| estimator.run_final(&traj))?;
        let (batch_s, batch) = timed(|| batch_estimate(&model, &p.constraints, norm, &traj))?;
        debug!("K = {horizon}: online {online_total_s:.3e} s, batch {batch_s:.3e} s");
        out.push(TimingRow {
            horizon,
            online_total_s,
            online_per_step_s: online_total_s / traj.len() as f64,
            batch_s,
            online_state_elems: state.element_count(),
            batch_var_count: model.basis_dim() + model.state_dim() * (horizon + 2),
            online_theta: online.theta_hat,
            batch_theta: batch.theta_hat,
        });
    }
    Ok(out)
}

const MIN_TIMED: f64 = 0.05;

fn timed<T>(mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let start = Instant::now();
    let mut value = f()?;
    let mut reps = 1u32;
    while start.elapsed().as_secs_f64() < MIN_TIMED {
        value = f()?;
        reps += 1;
    }
    Ok((start.elapsed().as_secs_f64() / f64::from(reps), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lti_model, quadratic_basis};
    use crate::presets;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn system_shape_counts_inactive_rows() {
        let p = presets::aircraft_pitch(0.09).unwrap();
        let p = LqProblem { horizon: 40, ..p };
        let traj = solve_box_constrained_lq(&p, &SolverOptions::default()).unwrap();
        let model = p.model().unwrap();
        let sys = BatchSystem::build(&model, &p.constraints, &traj).unwrap();
        let active = traj.active_steps(&p.constraints).unwrap().len();
        assert!(active > 0);
        assert_eq!(sys.inactive_steps(), 41 - active);
        assert_eq!(sys.nrows(), 3 * 41 + 2 * (41 - active));
        assert_eq!(sys.ncols(), 5 + 3 * 42);
    }

    #[test]
    fn single_integrator_recovers_weights() {
        let p = presets::single_integrator();
        let traj = solve_unconstrained_lq(&p).unwrap();
        let r = batch_estimate(
            &p.model().unwrap(),
            &p.constraints,
            &ParameterNormalization::default(),
            &traj,
        )
        .unwrap();
        assert!(r.unique);
        let theta = r.theta_hat.unwrap();
        assert!((theta - dvector![1.0, 5.0]).norm() < 1e-9);
        assert!(r.residual < 1e-16);
    }

    #[test]
    fn zero_trajectory_is_not_unique() {
        let model = make_lti_model(dmatrix![1.0], dmatrix![1.0], quadratic_basis(1, 1)).unwrap();
        let traj = Trajectory::new(vec![dvector![0.0]; 5], vec![dvector![0.0]; 5]).unwrap();
        let r = batch_estimate(
            &model,
            &ConstraintSet::unconstrained(1),
            &ParameterNormalization::default(),
            &traj,
        )
        .unwrap();
        assert!(!r.unique);
        assert!(r.theta_hat.is_none());
        assert_eq!(r.alpha_hat[0], 1.0);
    }

    #[test]
    fn dense_form_matches_sparse_rows() {
        let p = LqProblem {
            horizon: 3,
            ..presets::single_integrator()
        };
        let traj = solve_unconstrained_lq(&p).unwrap();
        let sys = BatchSystem::build(&p.model().unwrap(), &p.constraints, &traj).unwrap();
        let dense = sys.to_dense();
        // True solution: theta = [1, 5] and the backward costates, lambda_{K+1} = 0.
        let mut z = Vector::zeros(sys.ncols());
        z[0] = 1.0;
        z[1] = 5.0;
        let mut lambda = 0.0;
        for k in (0..=3).rev() {
            lambda = 2.0 * traj.states()[k][0] + lambda;
            z[2 + k] = lambda;
        }
        assert!((dense * z).amax() < 1e-10);
    }
}
