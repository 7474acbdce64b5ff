//! Random LQ instances for property tests, benchmarks and agreement checks.

use std::ops::RangeInclusive;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::forward::{solve_unconstrained_lq, LqProblem};
use crate::model::{ConstraintSet, Matrix, Vector};

/// Shape of the instances drawn by [`random_problem`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub state_dims: RangeInclusive<usize>,
    pub control_dims: RangeInclusive<usize>,
    pub horizons: RangeInclusive<usize>,
    /// Singular values of `A` are drawn from this interval.
    pub singular_values: RangeInclusive<f64>,
    pub weights: RangeInclusive<f64>,
    /// Draw a box that cuts into the unconstrained optimal controls.
    pub constrained: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            state_dims: 1..=4,
            control_dims: 1..=3,
            horizons: 5..=200,
            singular_values: 0.93..=0.999,
            weights: 0.5..=5.0,
            constrained: false,
        }
    }
}

impl InstanceSpec {
    pub fn constrained(mut self) -> Self {
        self.constrained = true;
        self
    }

    pub fn with_horizons(mut self, horizons: RangeInclusive<usize>) -> Self {
        self.horizons = horizons;
        self
    }
}

fn gaussian_scalar(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian_scalar(rng))
}

fn orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    gaussian(rng, n, n).qr().q()
}

/// Draws one instance. `A = U diag(s) V'` with random orthogonal `U`, `V`, so
/// it is stable and invertible; `B` is Gaussian and the weights are uniform.
///
/// For constrained specs, each box bound sits between 30% and 120% of the
/// largest unconstrained optimal control in that direction, so some
/// instances saturate and some do not.
pub fn random_problem(rng: &mut impl Rng, spec: &InstanceSpec) -> Result<LqProblem> {
    let n = rng.random_range(spec.state_dims.clone());
    let m = rng.random_range(spec.control_dims.clone());
    let horizon = rng.random_range(spec.horizons.clone());
    let s = Vector::from_fn(n, |_, _| rng.random_range(spec.singular_values.clone()));
    let a = orthogonal(rng, n) * Matrix::from_diagonal(&s) * orthogonal(rng, n).transpose();
    let b = gaussian(rng, n, m);
    let state_weights = Vector::from_fn(n, |_, _| rng.random_range(spec.weights.clone()));
    let control_weights = Vector::from_fn(m, |_, _| rng.random_range(spec.weights.clone()));
    let x0 = Vector::from_fn(n, |_, _| 5.0 * gaussian_scalar(rng));
    let mut problem = LqProblem {
        a,
        b,
        state_weights,
        control_weights,
        x0,
        horizon,
        constraints: ConstraintSet::unconstrained(m),
    };
    if spec.constrained {
        let free = solve_unconstrained_lq(&problem)?;
        let mut lower = Vector::zeros(m);
        let mut upper = Vector::zeros(m);
        for i in 0..m {
            let hi = free.controls().iter().map(|u| u[i]).fold(0.0_f64, f64::max);
            let lo = free.controls().iter().map(|u| u[i]).fold(0.0_f64, f64::min);
            upper[i] = rng.random_range(0.3..1.2) * hi.max(1e-3);
            lower[i] = rng.random_range(0.3..1.2) * lo.min(-1e-3);
        }
        problem.constraints = ConstraintSet::boxed(lower, upper)?;
    }
    Ok(problem)
}

/// `count` instances drawn deterministically from `seed`.
pub fn random_problems(seed: u64, count: usize, spec: &InstanceSpec) -> Result<Vec<LqProblem>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| random_problem(&mut rng, spec)).collect()
}
