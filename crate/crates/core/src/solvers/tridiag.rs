//! Symmetric tridiagonal helpers for the Krylov projections.
//!
//! `alpha` holds the diagonal (length k), `beta` the off-diagonal
//! (length k - 1).

use nalgebra::{DMatrix, SymmetricEigen};

/// Number of eigenvalues strictly below `x` (Sturm count via the LDLᵀ pivots).
pub fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - b2 / d;
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue by bisection on the Sturm count.
pub fn smallest_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let radius = |i: usize| {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < k { beta[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..k).map(|i| alpha[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..k).map(|i| alpha[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    lo -= f64::EPSILON * scale;
    hi += f64::EPSILON * scale;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(alpha, beta, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unit eigenvector for an accurately known eigenvalue `theta`, by inverse
/// iteration with a pivoted tridiagonal LU factorization.
pub fn eigenvector(alpha: &[f64], beta: &[f64], theta: f64) -> Vec<f64> {
    let k = alpha.len();
    if k == 1 {
        return vec![1.0];
    }
    let scale = alpha.iter().chain(beta).map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let floor = f64::EPSILON * scale;
    let mut y: Vec<f64> = (0..k).map(|i| 1.0 + 0.01 * ((i * 7 + 3) % 11) as f64).collect();
    for _ in 0..3 {
        y = solve_shifted_tridiagonal(alpha, beta, theta, &y, floor);
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= n);
    }
    y
}

/// Solves `(T - theta I) x = rhs` with partial pivoting. Zero pivots are
/// replaced by `floor`.
fn solve_shifted_tridiagonal(alpha: &[f64], beta: &[f64], theta: f64, rhs: &[f64], floor: f64) -> Vec<f64> {
    let k = alpha.len();
    // Row i of U holds u0 (diag), u1, u2 (two super-diagonals after pivoting).
    let mut u0 = vec![0.0; k];
    let mut u1 = vec![0.0; k];
    let mut u2 = vec![0.0; k];
    let mut b = rhs.to_vec();
    // Current row being eliminated: (diag, super, super2)
    let mut cur = [alpha[0] - theta, if k > 1 { beta[0] } else { 0.0 }, 0.0];
    for i in 0..k {
        if i + 1 == k {
            u0[i] = if cur[0].abs() < floor { floor } else { cur[0] };
            u1[i] = 0.0;
            u2[i] = 0.0;
            break;
        }
        // Next row: (sub, diag, super)
        let next = [beta[i], alpha[i + 1] - theta, if i + 2 < k { beta[i + 1] } else { 0.0 }];
        let (pivot_row, other, swap) = if next[0].abs() > cur[0].abs() {
            ([next[0], next[1], next[2]], [cur[0], cur[1], cur[2]], true)
        } else {
            ([cur[0], cur[1], cur[2]], [next[0], next[1], next[2]], false)
        };
        if swap {
            b.swap(i, i + 1);
        }
        let p = if pivot_row[0].abs() < floor { floor } else { pivot_row[0] };
        u0[i] = p;
        u1[i] = pivot_row[1];
        u2[i] = pivot_row[2];
        let m = other[0] / p;
        b[i + 1] -= m * b[i];
        cur = [other[1] - m * pivot_row[1], other[2] - m * pivot_row[2], 0.0];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        if i + 1 < k {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < k {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

/// Full eigendecomposition of a small tridiagonal matrix.
pub fn full_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t)
}
