//! Online inverse optimal control for discrete-time systems with control constraints.
//!
//! Given a stream of state/control pairs from a trajectory that is optimal for
//! an objective `sum_k theta' L_k(x_k, u_k)`, the [`estimator`] recovers `theta`
//! (up to a pinned normalization) with constant memory and without knowing the
//! horizon. Pairs whose control touches the constraint boundary still advance
//! the costate transition but contribute no residual.
//!
//! Supporting modules generate optimal reference trajectories ([`forward`]),
//! provide an offline whole-trajectory least-squares baseline ([`batch`]) and
//! read and write the CSV formats used by the command-line tool ([`io`]).

pub mod batch;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod model;
pub mod par;
pub mod presets;
pub mod sampling;

pub use error::{IocError, Result};
pub use estimator::{
    compute_f, compute_g, first_unique, residual, solve_factored, solve_parameters, EstimateResult, EstimatorOptions,
    EstimatorState, OnlineEstimator, ParameterSolution,
};
pub use forward::{
    solve_box_constrained_lq, solve_unconstrained_lq, verify_minimum_principle, LqProblem, MinimumPrincipleReport,
    SolverOptions,
};
pub use model::{
    make_lti_model, quadratic_basis, Basis, ConstraintSet, Dynamics, Matrix, ParameterNormalization, ProblemModel,
    Trajectory, Vector,
};
