//! Oracles shared by the integration tests.
#![allow(dead_code)]

use ioc_core::forward::backward_costates;
use ioc_core::{compute_f, compute_g, ConstraintSet, LqProblem, Matrix, ProblemModel, Trajectory, Vector};

/// `Q_k` for every `k`, built from scratch: each transition product is
/// recomputed as an explicit left-to-right product of `G_0..G_k`.
pub fn brute_force_information(model: &ProblemModel, cs: &ConstraintSet, traj: &Trajectory) -> Vec<Matrix> {
    let dim = model.state_dim() + model.basis_dim();
    let gs: Vec<Matrix> = traj
        .pairs()
        .enumerate()
        .map(|(k, (x, u))| compute_g(model, k, x, u).unwrap())
        .collect();
    let mut out = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let mut q = Matrix::zeros(dim, dim);
        for l in 0..=k {
            let (x, u) = (&traj.states()[l], &traj.controls()[l]);
            if !cs.is_interior(u).unwrap() {
                continue;
            }
            let mut prod = Matrix::identity(dim, dim);
            for g in &gs[..=l] {
                prod = g * prod;
            }
            let fg = compute_f(model, l, x, u).unwrap() * prod;
            q += fg.transpose() * fg;
        }
        out.push(q);
    }
    out
}

/// `[theta*; lambda_0*]` from the backward costate recursion, scaled so that
/// entry `pinned` equals `a`.
pub fn true_alpha(p: &LqProblem, traj: &Trajectory, pinned: usize, a: f64) -> Vector {
    let theta = p.theta();
    let costates = backward_costates(&p.model().unwrap(), traj, &theta).unwrap();
    let mut alpha = Vector::zeros(theta.len() + p.state_dim());
    alpha.rows_mut(0, theta.len()).copy_from(&theta);
    alpha
        .rows_mut(theta.len(), p.state_dim())
        .copy_from(&costates.lambdas[0]);
    let r = a / theta[pinned];
    alpha * r
}

pub fn rel_err(got: &Vector, want: &Vector) -> f64 {
    (got - want).norm() / want.norm()
}

pub fn rel_err_mat(got: &Matrix, want: &Matrix) -> f64 {
    (got - want).norm() / want.norm().max(f64::MIN_POSITIVE)
}

pub fn is_symmetric_psd(q: &Matrix, tol: f64) -> bool {
    let scale = q.norm().max(1.0);
    if (q - q.transpose()).amax() > tol * scale {
        return false;
    }
    let eig = q.clone().symmetric_eigen();
    eig.eigenvalues.iter().all(|&v| v >= -tol * scale)
}
