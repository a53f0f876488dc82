//! Dense helpers for the tiny (r×r) systems that appear in the row subproblems.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Frobenius inner product.
pub fn frobenius_dot(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|x, y| acc += x * y);
    acc
}

pub fn frobenius_norm_sq(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn norm_sq(a: ArrayView1<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Solves `h x = b` for symmetric positive definite `h` by Cholesky.
///
/// Fails when a pivot is not strictly positive; the error carries the ratio of
/// the largest to smallest squared pivot seen so far as a condition estimate.
pub fn cholesky_solve(h: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = h.nrows();
    if h.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "system {}x{} with right-hand side of length {}",
            h.nrows(),
            h.ncols(),
            b.len()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = h[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d.is_finite() && d > 0.0) {
            let condition_estimate = if d > 0.0 { max_pivot / d } else { f64::INFINITY };
            return Err(Error::LinearSolve { condition_estimate });
        }
        max_pivot = max_pivot.max(d);
        min_pivot = min_pivot.min(d);
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = h[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    if max_pivot / min_pivot > 1e15 {
        return Err(Error::LinearSolve {
            condition_estimate: max_pivot / min_pivot,
        });
    }
    // forward then backward substitution
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

/// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.
/// Only used by tests and diagnostics on r×r matrices.
pub fn symmetric_eigenvalues(m: ArrayView2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.to_owned();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}
