//! Dense linear algebra helpers shared by the online and batch estimators.

use nalgebra::{DMatrix, DVector};

/// Singular values of `m`, sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    let mut s = m.singular_values();
    s.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank(sorted_singular_values: &DVector<f64>, rel_tol: f64) -> usize {
    let Some(&max) = sorted_singular_values.iter().next() else {
        return 0;
    };
    if !(max > 0.0) {
        return 0;
    }
    sorted_singular_values.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Minimum-norm least-squares solution of `m x = b` with singular values at or
/// below `rel_tol * sigma_max` discarded.
pub fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(m.ncols());
    }
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.max();
    if !(max > 0.0) {
        return DVector::zeros(m.ncols());
    }
    let cutoff = rel_tol * max;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V'");
    let mut coeffs = u.transpose() * b;
    for (c, s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if *s > cutoff { *c / s } else { 0.0 };
    }
    v_t.transpose() * coeffs
}

/// Symmetrizes in place: `m <- (m + m') / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

const BLOCK: usize = 96;

/// Blocked right-looking Cholesky factorization, in place, lower triangle.
///
/// Only the lower triangle of `a` is read. On success the lower triangle holds
/// `L` with `A = L L'`; the strict upper triangle is left untouched. Fails with
/// the offending column when a pivot drops to `pivot_tol * max(diag(A))` or below.
pub fn cholesky_in_place(a: &mut DMatrix<f64>, pivot_tol: f64) -> Result<(), usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky of a non-square matrix");
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    if !(scale > 0.0) {
        return if n == 0 { Ok(()) } else { Err(0) };
    }
    let floor = pivot_tol * scale;

    let mut start = 0;
    while start < n {
        let b = BLOCK.min(n - start);
        let end = start + b;

        // Diagonal block.
        for j in start..end {
            let mut d = a[(j, j)];
            for l in start..j {
                d -= a[(j, l)] * a[(j, l)];
            }
            if !(d > floor) {
                return Err(j);
            }
            let d = d.sqrt();
            a[(j, j)] = d;
            for i in (j + 1)..end {
                let mut v = a[(i, j)];
                for l in start..j {
                    v -= a[(i, l)] * a[(j, l)];
                }
                a[(i, j)] = v / d;
            }
        }
        if end == n {
            break;
        }

        // Panel below the diagonal block: L21 = A21 L11^{-T}.
        for j in start..end {
            let d = a[(j, j)];
            for l in start..j {
                let ljl = a[(j, l)];
                if ljl != 0.0 {
                    for i in end..n {
                        let v = a[(i, l)];
                        a[(i, j)] -= v * ljl;
                    }
                }
            }
            for i in end..n {
                a[(i, j)] /= d;
            }
        }

        // Trailing update of the lower triangle, one block column at a time.
        let panel = a.view((end, start), (n - end, b)).into_owned();
        let mut col = end;
        while col < n {
            let w = BLOCK.min(n - col);
            let rows = n - col;
            let lhs = panel.rows(col - end, rows);
            let rhs = panel.rows(col - end, w);
            a.view_mut((col, col), (rows, w))
                .gemm(-1.0, &lhs, &rhs.transpose(), 1.0);
            col += w;
        }
        start = end;
    }
    Ok(())
}

/// Solves `L L' x = b` given the factor produced by [`cholesky_in_place`].
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for j in 0..n {
        x[j] /= l[(j, j)];
        let xj = x[j];
        for i in (j + 1)..n {
            x[i] -= l[(i, j)] * xj;
        }
    }
    for j in (0..n).rev() {
        let mut v = x[j];
        for i in (j + 1)..n {
            v -= l[(i, j)] * x[i];
        }
        x[j] = v / l[(j, j)];
    }
    x
}
