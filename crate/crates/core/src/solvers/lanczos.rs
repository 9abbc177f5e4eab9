use log::debug;

use super::{axpy, dot, norm, reorthogonalize, scale, tridiag};
use crate::error::{Error, Result};
use crate::operators::SparseOperator;

/// Extremal eigenpair with its true residual `‖Hv − λv‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Absolute residual target, in units of the operator.
    pub tol: f64,
    /// Krylov dimension cap. The basis is stored in full, so memory grows as
    /// `max_iter * dim`.
    pub max_iter: usize,
    /// Ritz values are extracted every `check_every` steps.
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, max_iter: 2000, check_every: 5 }
    }
}

/// Lowest eigenpair by Lanczos with full reorthogonalization.
pub fn lowest_eigenpair(op: &SparseOperator, tol: f64) -> Result<Eigenpair> {
    lowest_eigenpair_with(op, &LanczosOptions { tol, ..Default::default() })
}

pub fn lowest_eigenpair_with(op: &SparseOperator, opts: &LanczosOptions) -> Result<Eigenpair> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let max_iter = opts.max_iter.min(n).max(1);

    // All-ones start with a deterministic index-dependent perturbation.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.7548776662).sin()).collect();
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alpha = Vec::with_capacity(max_iter);
    let mut beta: Vec<f64> = Vec::with_capacity(max_iter);
    let mut w = vec![0.0; n];
    let mut best_est = f64::INFINITY;
    let op_scale = op.norm_bound().max(f64::MIN_POSITIVE);

    loop {
        op.matvec(&v, &mut w);
        let a = dot(&v, &w);
        axpy(-a, &v, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(v.clone());
        alpha.push(a);
        reorthogonalize(&basis, &mut w);
        let b_next = norm(&w);
        let k = alpha.len();
        let exhausted = b_next <= 1e-13 * op_scale || k == max_iter;

        if exhausted || k % opts.check_every == 0 {
            let theta = tridiag::smallest_eigenvalue(&alpha, &beta);
            let y = tridiag::eigenvector(&alpha, &beta, theta);
            let estimate = b_next * y[k - 1].abs();
            best_est = best_est.min(estimate);
            if estimate <= 0.5 * opts.tol || exhausted {
                let mut x = vec![0.0; n];
                for (coef, vb) in y.iter().zip(&basis) {
                    axpy(*coef, vb, &mut x);
                }
                let nx = norm(&x);
                scale(1.0 / nx, &mut x);
                let hx = op.apply(&x);
                let value = dot(&x, &hx);
                let mut r = hx;
                axpy(-value, &x, &mut r);
                let residual = norm(&r);
                debug!("lanczos: dim={n} steps={k} value={value:.15e} residual={residual:.3e}");
                if residual <= opts.tol {
                    return Ok(Eigenpair { value, vector: x, residual, iterations: k });
                }
                if exhausted {
                    return Err(Error::NotConverged { method: "lanczos", iterations: k, residual });
                }
            }
        }

        beta.push(b_next);
        v.copy_from_slice(&w);
        scale(1.0 / b_next, &mut v);
    }
}
