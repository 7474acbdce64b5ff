//! Problem ingredients: dynamics, basis functions, control constraints,
//! parameter normalization and trajectories.
//!
//! Jacobians follow the row-gradient layout used throughout the crate:
//! for dynamics `f: R^n x R^m -> R^n` the state Jacobian is `n x n` with entry
//! `(i, j) = d f^j / d x^i` and the control Jacobian is `m x n`. For a basis
//! `L: R^n x R^m -> R^N` the Jacobians are `n x N` and `m x N`. For linear
//! dynamics `x' = A x + B u` this makes the state Jacobian `A'` and the control
//! Jacobian `B'`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{IocError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Discrete-time dynamics `x_{k+1} = f_k(x_k, u_k)` with their Jacobians.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn next_state(&self, k: usize, x: &Vector, u: &Vector) -> Vector;
    /// `n x n`, entry `(i, j) = d f^j / d x^i`.
    fn jac_x(&self, k: usize, x: &Vector, u: &Vector) -> Matrix;
    /// `m x n`, entry `(i, j) = d f^j / d u^i`.
    fn jac_u(&self, k: usize, x: &Vector, u: &Vector) -> Matrix;
}

/// Stage basis functions `L_k(x, u) in R^N`; the stage cost is `theta' L_k`.
pub trait Basis: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, k: usize, x: &Vector, u: &Vector) -> Vector;
    /// `n x N`, entry `(i, j) = d L^j / d x^i`.
    fn jac_x(&self, k: usize, x: &Vector, u: &Vector) -> Matrix;
    /// `m x N`, entry `(i, j) = d L^j / d u^i`.
    fn jac_u(&self, k: usize, x: &Vector, u: &Vector) -> Matrix;
}

/// Time-invariant linear dynamics `x_{k+1} = A x_k + B u_k`.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    a: Matrix,
    b: Matrix,
    a_t: Matrix,
    b_t: Matrix,
}

impl LinearDynamics {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(IocError::dims(
                "A",
                "square matrix",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(IocError::dims(
                "B",
                format!("{} x m with m >= 1", a.nrows()),
                format!("{}x{}", b.nrows(), b.ncols()),
            ));
        }
        let a_t = a.transpose();
        let b_t = b.transpose();
        Ok(LinearDynamics { a, b, a_t, b_t })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }
}

impl Dynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn next_state(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    fn jac_x(&self, _k: usize, _x: &Vector, _u: &Vector) -> Matrix {
        self.a_t.clone()
    }

    fn jac_u(&self, _k: usize, _x: &Vector, _u: &Vector) -> Matrix {
        self.b_t.clone()
    }
}

/// Diagonal quadratic basis `L = [(x^1)^2 .. (x^n)^2, (u^1)^2 .. (u^m)^2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadraticBasis {
    state_dim: usize,
    control_dim: usize,
}

/// Builds the diagonal quadratic basis with `N = n + m` components.
pub fn quadratic_basis(state_dim: usize, control_dim: usize) -> QuadraticBasis {
    QuadraticBasis { state_dim, control_dim }
}

impl Basis for QuadraticBasis {
    fn dim(&self) -> usize {
        self.state_dim + self.control_dim
    }

    fn eval(&self, _k: usize, x: &Vector, u: &Vector) -> Vector {
        Vector::from_iterator(self.dim(), x.iter().chain(u.iter()).map(|v| v * v))
    }

    fn jac_x(&self, _k: usize, x: &Vector, _u: &Vector) -> Matrix {
        let mut j = Matrix::zeros(self.state_dim, self.dim());
        for (i, xi) in x.iter().enumerate().take(self.state_dim) {
            j[(i, i)] = 2.0 * xi;
        }
        j
    }

    fn jac_u(&self, _k: usize, _x: &Vector, u: &Vector) -> Matrix {
        let mut j = Matrix::zeros(self.control_dim, self.dim());
        for (i, ui) in u.iter().enumerate().take(self.control_dim) {
            j[(i, self.state_dim + i)] = 2.0 * ui;
        }
        j
    }
}

type VectorFn = Box<dyn Fn(usize, &Vector, &Vector) -> Vector + Send + Sync>;
type MatrixFn = Box<dyn Fn(usize, &Vector, &Vector) -> Matrix + Send + Sync>;

/// Dynamics given by user closures. The closures must be pure.
pub struct ClosureDynamics {
    state_dim: usize,
    control_dim: usize,
    f: VectorFn,
    jac_x: MatrixFn,
    jac_u: MatrixFn,
}

impl ClosureDynamics {
    pub fn new<F, Jx, Ju>(state_dim: usize, control_dim: usize, f: F, jac_x: Jx, jac_u: Ju) -> Self
    where
        F: Fn(usize, &Vector, &Vector) -> Vector + Send + Sync + 'static,
        Jx: Fn(usize, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
        Ju: Fn(usize, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        ClosureDynamics {
            state_dim,
            control_dim,
            f: Box::new(f),
            jac_x: Box::new(jac_x),
            jac_u: Box::new(jac_u),
        }
    }
}

impl Dynamics for ClosureDynamics {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn control_dim(&self) -> usize {
        self.control_dim
    }

    fn next_state(&self, k: usize, x: &Vector, u: &Vector) -> Vector {
        (self.f)(k, x, u)
    }

    fn jac_x(&self, k: usize, x: &Vector, u: &Vector) -> Matrix {
        (self.jac_x)(k, x, u)
    }

    fn jac_u(&self, k: usize, x: &Vector, u: &Vector) -> Matrix {
        (self.jac_u)(k, x, u)
    }
}

/// Basis given by user closures. The closures must be pure.
pub struct ClosureBasis {
    dim: usize,
    eval: VectorFn,
    jac_x: MatrixFn,
    jac_u: MatrixFn,
}

impl ClosureBasis {
    pub fn new<F, Jx, Ju>(dim: usize, eval: F, jac_x: Jx, jac_u: Ju) -> Self
    where
        F: Fn(usize, &Vector, &Vector) -> Vector + Send + Sync + 'static,
        Jx: Fn(usize, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
        Ju: Fn(usize, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        ClosureBasis {
            dim,
            eval: Box::new(eval),
            jac_x: Box::new(jac_x),
            jac_u: Box::new(jac_u),
        }
    }
}

impl Basis for ClosureBasis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, k: usize, x: &Vector, u: &Vector) -> Vector {
        (self.eval)(k, x, u)
    }

    fn jac_x(&self, k: usize, x: &Vector, u: &Vector) -> Matrix {
        (self.jac_x)(k, x, u)
    }

    fn jac_u(&self, k: usize, x: &Vector, u: &Vector) -> Matrix {
        (self.jac_u)(k, x, u)
    }
}

/// Dynamics plus basis: everything the estimator needs to know about the
/// optimal control problem apart from the constraint set.
///
/// Cheap to clone; the underlying callables are shared.
#[derive(Clone)]
pub struct ProblemModel {
    dynamics: Arc<dyn Dynamics>,
    basis: Arc<dyn Basis>,
}

impl fmt::Debug for ProblemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemModel")
            .field("state_dim", &self.state_dim())
            .field("control_dim", &self.control_dim())
            .field("basis_dim", &self.basis_dim())
            .finish()
    }
}

impl ProblemModel {
    pub fn new(dynamics: Arc<dyn Dynamics>, basis: Arc<dyn Basis>) -> Result<Self> {
        if dynamics.state_dim() == 0 || dynamics.control_dim() == 0 || basis.dim() == 0 {
            return Err(IocError::InvalidArgument(
                "state, control and basis dimensions must be positive".into(),
            ));
        }
        Ok(ProblemModel { dynamics, basis })
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn basis_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn basis(&self) -> &dyn Basis {
        self.basis.as_ref()
    }

    pub(crate) fn check_point(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(IocError::dims("state", self.state_dim(), x.len()));
        }
        if u.len() != self.control_dim() {
            return Err(IocError::dims("control", self.control_dim(), u.len()));
        }
        Ok(())
    }

    pub fn next_state(&self, k: usize, x: &Vector, u: &Vector) -> Result<Vector> {
        self.check_point(x, u)?;
        let v = self.dynamics.next_state(k, x, u);
        check_vec("dynamics", &v, self.state_dim())?;
        Ok(v)
    }

    pub fn dynamics_jac_x(&self, k: usize, x: &Vector, u: &Vector) -> Result<Matrix> {
        let n = self.state_dim();
        let j = self.dynamics.jac_x(k, x, u);
        check_mat("dynamics state Jacobian", &j, n, n)?;
        Ok(j)
    }

    pub fn dynamics_jac_u(&self, k: usize, x: &Vector, u: &Vector) -> Result<Matrix> {
        let j = self.dynamics.jac_u(k, x, u);
        check_mat("dynamics control Jacobian", &j, self.control_dim(), self.state_dim())?;
        Ok(j)
    }

    pub fn basis_eval(&self, k: usize, x: &Vector, u: &Vector) -> Result<Vector> {
        let v = self.basis.eval(k, x, u);
        check_vec("basis", &v, self.basis_dim())?;
        Ok(v)
    }

    pub fn basis_jac_x(&self, k: usize, x: &Vector, u: &Vector) -> Result<Matrix> {
        let j = self.basis.jac_x(k, x, u);
        check_mat("basis state Jacobian", &j, self.state_dim(), self.basis_dim())?;
        Ok(j)
    }

    pub fn basis_jac_u(&self, k: usize, x: &Vector, u: &Vector) -> Result<Matrix> {
        let j = self.basis.jac_u(k, x, u);
        check_mat("basis control Jacobian", &j, self.control_dim(), self.basis_dim())?;
        Ok(j)
    }

    /// Largest relative discrepancy between the declared Jacobians and central
    /// finite differences of the dynamics and basis at `(k, x, u)`.
    ///
    /// Each entry is compared as `|declared - fd| / max(1, |fd|)`.
    pub fn jacobian_fd_error(&self, k: usize, x: &Vector, u: &Vector) -> Result<f64> {
        self.check_point(x, u)?;
        let n = self.state_dim();
        let m = self.control_dim();
        let declared = [
            self.dynamics_jac_x(k, x, u)?,
            self.dynamics_jac_u(k, x, u)?,
            self.basis_jac_x(k, x, u)?,
            self.basis_jac_u(k, x, u)?,
        ];
        let mut worst = 0.0_f64;
        let mut compare = |declared: &Matrix, row: usize, fd: &Vector| {
            for (j, v) in fd.iter().enumerate() {
                let err = (declared[(row, j)] - v).abs() / v.abs().max(1.0);
                worst = worst.max(err);
            }
        };
        for i in 0..n {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let df = (self.next_state(k, &xp, u)? - self.next_state(k, &xm, u)?) / (2.0 * h);
            let dl = (self.basis_eval(k, &xp, u)? - self.basis_eval(k, &xm, u)?) / (2.0 * h);
            compare(&declared[0], i, &df);
            compare(&declared[2], i, &dl);
        }
        for i in 0..m {
            let h = 1e-6 * u[i].abs().max(1.0);
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let df = (self.next_state(k, x, &up)? - self.next_state(k, x, &um)?) / (2.0 * h);
            let dl = (self.basis_eval(k, x, &up)? - self.basis_eval(k, x, &um)?) / (2.0 * h);
            compare(&declared[1], i, &df);
            compare(&declared[3], i, &dl);
        }
        Ok(worst)
    }
}

fn check_vec(context: &'static str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(IocError::dims(context, len, v.len()));
    }
    Ok(())
}

fn check_mat(context: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(IocError::dims(
            context,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// Reciprocal 2-norm condition number below which a state Jacobian counts as singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Builds the model for `x_{k+1} = A x_k + B u_k` with the given basis.
///
/// Fails with [`IocError::AssumptionViolated`] when `A` is singular, since the
/// forward costate recursion needs the inverse of the state Jacobian.
pub fn make_lti_model<B: Basis + 'static>(a: Matrix, b: Matrix, basis: B) -> Result<ProblemModel> {
    let dynamics = LinearDynamics::new(a, b)?;
    let rcond = reciprocal_condition(dynamics.a());
    if !(rcond > SINGULARITY_TOL) {
        return Err(IocError::AssumptionViolated { k: 0, rcond });
    }
    ProblemModel::new(Arc::new(dynamics), Arc::new(basis))
}

/// `sigma_min / sigma_max` of a square matrix (0 for the zero matrix).
pub(crate) fn reciprocal_condition(m: &Matrix) -> f64 {
    let s = m.singular_values();
    let max = s.max();
    if max > 0.0 && max.is_finite() {
        s.min() / max
    } else {
        0.0
    }
}

/// Closed box `lower <= u <= upper` used as the control constraint set.
///
/// Bounds may be infinite. A control is interior when every component clears
/// both bounds by more than the activity tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    lower: Vector,
    upper: Vector,
    activity_tolerance: f64,
}

impl ConstraintSet {
    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(IocError::dims("box bounds", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(IocError::InvalidArgument(
                "box must have nonempty interior (lower < upper componentwise)".into(),
            ));
        }
        let width = lower
            .iter()
            .zip(upper.iter())
            .map(|(l, u)| u - l)
            .filter(|w| w.is_finite())
            .fold(0.0_f64, f64::max);
        let activity_tolerance = 1e-9 * width.max(1.0);
        Ok(ConstraintSet {
            lower,
            upper,
            activity_tolerance,
        })
    }

    /// The box `[-delta, delta]^m`.
    pub fn symmetric(control_dim: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(IocError::InvalidArgument(format!(
                "box half-width must be positive, got {delta}"
            )));
        }
        Self::boxed(
            Vector::from_element(control_dim, -delta),
            Vector::from_element(control_dim, delta),
        )
    }

    pub fn unconstrained(control_dim: usize) -> Self {
        Self::symmetric(control_dim, f64::INFINITY).expect("infinite box is valid")
    }

    pub fn with_activity_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(IocError::InvalidArgument(format!(
                "activity tolerance must be finite and >= 0, got {tol}"
            )));
        }
        self.activity_tolerance = tol;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn activity_tolerance(&self) -> f64 {
        self.activity_tolerance
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(self.upper.iter()).any(|b| b.is_finite())
    }

    pub fn is_interior(&self, u: &Vector) -> Result<bool> {
        if u.len() != self.dim() {
            return Err(IocError::dims("control", self.dim(), u.len()));
        }
        let eps = self.activity_tolerance;
        Ok(u.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (l, h))| l + eps < *v && *v < h - eps))
    }

    pub fn project(&self, u: &Vector) -> Vector {
        Vector::from_iterator(
            u.len(),
            u.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(v, (l, h))| v.clamp(*l, *h)),
        )
    }
}

/// The parameter set `{theta : theta[pinned] = value}` with `value > 0`.
///
/// `pinned` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterNormalization {
    value: f64,
    pinned: usize,
}

impl Default for ParameterNormalization {
    fn default() -> Self {
        ParameterNormalization { value: 1.0, pinned: 0 }
    }
}

impl ParameterNormalization {
    pub fn new(value: f64, pinned: usize) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(IocError::InvalidArgument(format!(
                "normalization value must be positive, got {value}"
            )));
        }
        Ok(ParameterNormalization { value, pinned })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn pinned(&self) -> usize {
        self.pinned
    }

    pub(crate) fn check(&self, basis_dim: usize) -> Result<()> {
        if self.pinned >= basis_dim {
            return Err(IocError::InvalidArgument(format!(
                "pinned parameter index {} out of range for {} basis functions",
                self.pinned, basis_dim
            )));
        }
        Ok(())
    }
}

/// A finite sequence of state/control pairs `(x_k, u_k)`, `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vector>,
    controls: Vec<Vector>,
}

impl Trajectory {
    pub fn new(states: Vec<Vector>, controls: Vec<Vector>) -> Result<Self> {
        if states.is_empty() {
            return Err(IocError::InvalidArgument(
                "trajectory must contain at least one pair".into(),
            ));
        }
        if states.len() != controls.len() {
            return Err(IocError::dims("trajectory length", states.len(), controls.len()));
        }
        let (n, m) = (states[0].len(), controls[0].len());
        if n == 0 || m == 0 {
            return Err(IocError::InvalidArgument(
                "state and control dimensions must be positive".into(),
            ));
        }
        if let Some(bad) = states.iter().position(|x| x.len() != n) {
            return Err(IocError::dims("state", n, states[bad].len()).at_step(bad));
        }
        if let Some(bad) = controls.iter().position(|u| u.len() != m) {
            return Err(IocError::dims("control", m, controls[bad].len()).at_step(bad));
        }
        Ok(Trajectory { states, controls })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Final time index `K`.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn control_dim(&self) -> usize {
        self.controls[0].len()
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn controls(&self) -> &[Vector] {
        &self.controls
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Vector, &Vector)> + '_ {
        self.states.iter().zip(self.controls.iter())
    }

    /// Pairs from time `start` onward (empty if `start` is past the end).
    pub fn suffix(&self, start: usize) -> impl Iterator<Item = (&Vector, &Vector)> + '_ {
        self.pairs().skip(start)
    }

    /// Largest relative one-step mismatch `|x_{k+1} - f_k(x_k, u_k)| / max(1, |x_{k+1}|)`.
    pub fn dynamics_mismatch(&self, model: &ProblemModel) -> Result<f64> {
        let mut worst = 0.0_f64;
        for k in 0..self.horizon() {
            let predicted = model.next_state(k, &self.states[k], &self.controls[k])?;
            let actual = &self.states[k + 1];
            worst = worst.max((actual - predicted).norm() / actual.norm().max(1.0));
        }
        Ok(worst)
    }

    /// Indices `k` where the control is not interior to `cs`.
    pub fn active_steps(&self, cs: &ConstraintSet) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (k, u) in self.controls.iter().enumerate() {
            if !cs.is_interior(u)? {
                out.push(k);
            }
        }
        Ok(out)
    }
}
