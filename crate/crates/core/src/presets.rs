//! The two reference problems: a scalar single integrator and a linearised
//! aircraft pitch model with two elevator surfaces.

use nalgebra::{dmatrix, dvector};

use crate::error::Result;
use crate::forward::LqProblem;
use crate::model::ConstraintSet;

/// `x_{k+1} = x_k + u_k`, stage cost `x^2 + 5 u^2`, `x_0 = 10`, `K = 10`, no constraints.
pub fn single_integrator() -> LqProblem {
    LqProblem {
        a: dmatrix![1.0],
        b: dmatrix![1.0],
        state_weights: dvector![1.0],
        control_weights: dvector![5.0],
        x0: dvector![10.0],
        horizon: 10,
        constraints: ConstraintSet::unconstrained(1),
    }
}

/// Pitch dynamics (angle of attack, pitch rate, pitch angle) driven by an
/// elevator and a trim tab, both limited to `[-delta, delta]`, with weights
/// `diag(1, 4, 2)` on the state and `diag(3, 6)` on the controls,
/// `x_0 = [0.5, 0, 0.2]` and `K = 250`.
pub fn aircraft_pitch(delta: f64) -> Result<LqProblem> {
    let constraints = if delta.is_infinite() {
        ConstraintSet::unconstrained(2)
    } else {
        ConstraintSet::symmetric(2, delta)?
    };
    Ok(LqProblem {
        a: dmatrix![
            0.9654, 5.4572, 0.0;
            -0.0013, 0.9545, 0.0;
            -0.0038, 5.5437, 1.0
        ],
        b: dmatrix![
            0.0284, 0.0142;
            0.0020, 0.0010;
            0.0056, 0.0028
        ],
        state_weights: dvector![1.0, 4.0, 2.0],
        control_weights: dvector![3.0, 6.0],
        x0: dvector![0.5, 0.0, 0.2],
        horizon: 250,
        constraints,
    })
}

/// Constraint half-widths used for the saturation-duration sweep.
pub const PITCH_SWEEP_DELTAS: [f64; 5] = [0.07, 0.08, 0.09, 0.10, 0.11];
