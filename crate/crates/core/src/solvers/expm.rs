//! Krylov approximation of `exp(−τH) v` with adaptive time stepping.
//!
//! Each step projects onto a Lanczos basis started at the current vector and
//! exponentiates the small tridiagonal matrix exactly. The step error is
//! estimated by `β₀ β_m |[exp(−hT_m) e₁]_m|`; a step that misses its share of
//! the tolerance within the Krylov cap is halved.

use log::debug;

use super::{axpy, dot, norm, reorthogonalize, scale, tridiag};
use crate::error::{Error, Result};
use crate::operators::SparseOperator;

const MAX_STEP_SPREAD: f64 = 40.0;

/// Heat kernel column `K(·, τ) = exp(−τH) e_source`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelSample {
    pub tau: f64,
    pub source: usize,
    pub column: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExpmOptions {
    /// Absolute error target on the propagated vector.
    pub tol: f64,
    pub krylov_cap: usize,
    /// Give up once a step would shrink below `tau * min_step_fraction`.
    pub min_step_fraction: f64,
}

impl Default for ExpmOptions {
    fn default() -> Self {
        ExpmOptions { tol: 1e-10, krylov_cap: 64, min_step_fraction: 1e-9 }
    }
}

pub fn heat_kernel_column(op: &SparseOperator, tau: f64, source: usize, tol: f64) -> Result<HeatKernelSample> {
    if source >= op.dim() {
        return Err(Error::SiteOutOfRange { site: source, n: op.dim() });
    }
    let mut e = vec![0.0; op.dim()];
    e[source] = 1.0;
    let column = expm_action(op, tau, &e, &ExpmOptions { tol, ..Default::default() })?;
    Ok(HeatKernelSample { tau, source, column })
}

/// `exp(−τH) v`.
pub fn expm_action(op: &SparseOperator, tau: f64, v: &[f64], opts: &ExpmOptions) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("diffusion time {tau} must be non-negative")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let mut u = v.to_vec();
    if tau == 0.0 || norm(&u) == 0.0 {
        return Ok(u);
    }
    // The a-posteriori estimate is unreliable once exp(−hH) resolves only
    // the few slowest Ritz values, so steps are capped at h‖H‖ ≤ MAX_STEP_SPREAD.
    let h_max = MAX_STEP_SPREAD / op.norm_bound().max(f64::MIN_POSITIVE);
    let mut t = 0.0;
    let mut h = tau.min(h_max);
    let mut steps = 0;
    while t < tau {
        h = h.min(tau - t);
        let budget = opts.tol * h / tau;
        match krylov_step(op, &u, h, budget, opts.krylov_cap) {
            Some(next) => {
                u = next;
                t += h;
                steps += 1;
                h = (2.0 * h).min(h_max);
            }
            None => {
                h *= 0.5;
                if h < tau * opts.min_step_fraction {
                    return Err(Error::NotConverged { method: "krylov expm", iterations: steps, residual: budget });
                }
            }
        }
    }
    debug!("expm: dim={} tau={tau:.4e} steps={steps}", op.dim());
    Ok(u)
}

/// One step `exp(−hH) u`, or `None` when the error estimate exceeds
/// `budget` at the Krylov cap.
fn krylov_step(op: &SparseOperator, u: &[f64], h: f64, budget: f64, cap: usize) -> Option<Vec<f64>> {
    let n = op.dim();
    let beta0 = norm(u);
    let mut v = u.to_vec();
    scale(1.0 / beta0, &mut v);
    let op_scale = op.norm_bound().max(f64::MIN_POSITIVE);
    let cap = cap.min(n).max(1);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut alpha = Vec::with_capacity(cap);
    let mut beta: Vec<f64> = Vec::with_capacity(cap);
    let mut w = vec![0.0; n];
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
        let m = alpha.len();
        let breakdown = b_next <= 1e-13 * op_scale;

        let eig = tridiag::full_eigen(&alpha, &beta);
        let coeffs: Vec<f64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| eig.eigenvectors[(i, k)] * (-h * eig.eigenvalues[k]).exp() * eig.eigenvectors[(0, k)])
                    .sum()
            })
            .collect();
        let estimate = beta0 * b_next * coeffs[m - 1].abs();
        if breakdown || estimate <= budget {
            let mut out = vec![0.0; n];
            for (c, vb) in coeffs.iter().zip(&basis) {
                axpy(beta0 * c, vb, &mut out);
            }
            return Some(out);
        }
        if m == cap {
            return None;
        }
        beta.push(b_next);
        v.copy_from_slice(&w);
        scale(1.0 / b_next, &mut v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_graph, FamilySpec};
    use crate::operators::bath_operator;
    use crate::solvers::dense_spectrum;

    #[test]
    fn identity_at_zero_time() {
        let g = build_graph(&FamilySpec::GasketB2 { generation: 2 }).unwrap();
        let h = bath_operator(&g, 1.0, true);
        let k = heat_kernel_column(&h, 0.0, 4, 1e-12).unwrap();
        assert!(k.column.iter().enumerate().all(|(i, &v)| v == if i == 4 { 1.0 } else { 0.0 }));
    }

    #[test]
    fn two_site_closed_form() {
        let g = build_graph(&FamilySpec::Chain { length: 2 }).unwrap();
        let j = 0.8;
        let h = bath_operator(&g, j, true);
        for &tau in &[0.1, 1.0, 7.5] {
            let k = heat_kernel_column(&h, tau, 0, 1e-13).unwrap();
            let e = (-2.0 * j * tau).exp();
            assert!((k.column[0] - 0.5 * (1.0 + e)).abs() < 1e-13);
            assert!((k.column[1] - 0.5 * (1.0 - e)).abs() < 1e-13);
        }
    }

    #[test]
    fn gasket_matches_dense_expm() {
        let g = build_graph(&FamilySpec::GasketB2 { generation: 4 }).unwrap();
        let h = bath_operator(&g, 1.0, true);
        let dense = dense_spectrum(&h).unwrap();
        for &tau in &[5.0, 60.0] {
            let k = heat_kernel_column(&h, tau, 10, 1e-11).unwrap();
            let exact = dense.heat_kernel_column(tau, 10);
            let err = k.column.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "tau={tau}: {err}");
            let sum: f64 = k.column.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(k.column.iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn semigroup() {
        let g = build_graph(&FamilySpec::Vicsek { generation: 2 }).unwrap();
        let h = bath_operator(&g, 1.0, true);
        let opts = ExpmOptions { tol: 1e-12, ..Default::default() };
        let full = heat_kernel_column(&h, 3.5, 12, 1e-12).unwrap().column;
        let half = heat_kernel_column(&h, 1.25, 12, 1e-12).unwrap().column;
        let composed = expm_action(&h, 2.25, &half, &opts).unwrap();
        for (a, b) in full.iter().zip(&composed) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_negative_time() {
        let g = build_graph(&FamilySpec::Chain { length: 3 }).unwrap();
        let h = bath_operator(&g, 1.0, true);
        assert!(heat_kernel_column(&h, -1.0, 0, 1e-10).is_err());
    }
}
