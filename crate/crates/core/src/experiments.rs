//! Saturation-duration sweep: how long does it take to reach a unique estimate
//! as the control box is widened, with and without using saturated data.

use crate::error::Result;
use crate::estimator::{first_unique, EstimatorOptions, OnlineEstimator};
use crate::forward::{solve_box_constrained_lq, solve_unconstrained_lq, LqProblem, SolverOptions};
use crate::model::{ConstraintSet, ParameterNormalization, Trajectory};
use crate::par;

/// One row of [`constraint_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub active_steps: usize,
    /// First unique step of the full recursion.
    pub first_unique_standard: Option<usize>,
    /// First unique step when all data up to the last active step is discarded.
    pub first_unique_adhoc: Option<usize>,
}

/// Settings shared by every sweep run.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepSettings {
    pub normalization: ParameterNormalization,
    pub estimator: EstimatorOptions,
    pub solver: SolverOptions,
}

/// Optimal trajectory of `p`, using the plain Riccati solution when the box is unbounded.
pub fn generate(p: &LqProblem, solver: &SolverOptions) -> Result<Trajectory> {
    if p.constraints.is_bounded() {
        solve_box_constrained_lq(p, solver)
    } else {
        solve_unconstrained_lq(p)
    }
}

/// Replaces the box of `base` by `[-delta, delta]^m` for each `delta` and
/// compares both estimators. Runs are independent and go through [`par::map`].
pub fn constraint_sweep(base: &LqProblem, deltas: &[f64], settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    par::map(deltas, |&delta| sweep_one(base, delta, settings))
        .into_iter()
        .collect()
}

fn sweep_one(base: &LqProblem, delta: f64, settings: &SweepSettings) -> Result<SweepRow> {
    let m = base.control_dim();
    let constraints = if delta.is_infinite() {
        ConstraintSet::unconstrained(m)
    } else {
        ConstraintSet::symmetric(m, delta)?
    };
    let problem = LqProblem {
        constraints: constraints.clone(),
        ..base.clone()
    };
    let traj = generate(&problem, &settings.solver)?;
    let active = traj.active_steps(&constraints)?;
    let estimator = OnlineEstimator::new(
        problem.model()?,
        constraints,
        settings.normalization,
        settings.estimator,
    )?;
    let standard = first_unique(&estimator.run(&traj)?);
    let start = active.last().map_or(0, |&k| k + 1);
    let adhoc = first_unique(&estimator.run_from(&traj, start)?);
    Ok(SweepRow {
        delta,
        active_steps: active.len(),
        first_unique_standard: standard,
        first_unique_adhoc: adhoc,
    })
}
