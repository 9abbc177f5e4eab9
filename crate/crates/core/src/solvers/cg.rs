use log::debug;

use super::{axpy, dot, norm};
use crate::error::{Error, Result};
use crate::operators::SparseOperator;

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `‖b − (z − H)x‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-10, max_iter: None }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Resolvent column: solves `(z − H) x = e_source`, i.e. `x = G(·, source; z)`.
pub fn solve_resolvent(op: &SparseOperator, z: f64, source: usize, tol: f64) -> Result<Vec<f64>> {
    if source >= op.dim() {
        return Err(Error::SiteOutOfRange { site: source, n: op.dim() });
    }
    let mut rhs = vec![0.0; op.dim()];
    rhs[source] = 1.0;
    Ok(solve_shifted(op, z, &rhs, None, &CgOptions { tol, max_iter: None })?.x)
}

/// Solves `(z − H) x = rhs` for a shift `z` below the spectrum of `H`.
///
/// Runs conjugate gradients on the positive definite system
/// `(H − z) x = −rhs`. A non-positive curvature `pᵀ(H − z)p` means the shift
/// is not below the spectrum.
pub fn solve_shifted(
    op: &SparseOperator,
    z: f64,
    rhs: &[f64],
    guess: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<CgSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let n = op.dim();
    assert_eq!(rhs.len(), n);
    let apply = |x: &[f64], out: &mut [f64]| {
        op.matvec(x, out);
        axpy(-z, x, out);
    };
    let b: Vec<f64> = rhs.iter().map(|v| -v).collect();
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return Ok(CgSolution { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let max_iter = opts.max_iter.unwrap_or(20_000 + 2 * n);

    let mut x = guess.map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut ap = vec![0.0; n];
    let mut r = b.clone();
    if guess.is_some() {
        apply(&x, &mut ap);
        axpy(-1.0, &ap, &mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = opts.tol * b_norm;
    let mut restarts = 0;

    for it in 0..max_iter {
        if rr.sqrt() <= target {
            // Confirm against the true residual before accepting.
            apply(&x, &mut ap);
            let true_r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
            let rel = norm(&true_r) / b_norm;
            if rel <= opts.tol {
                debug!("cg: dim={n} z={z:.6e} iterations={it} rel_residual={rel:.3e}");
                return Ok(CgSolution { x, iterations: it, relative_residual: rel });
            }
            restarts += 1;
            if restarts > 10 {
                return Err(Error::NotConverged { method: "conjugate gradient", iterations: it, residual: rel });
            }
            r = true_r;
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
        }
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::ShiftInSpectrum { shift: z, curvature: curvature / dot(&p, &p) });
        }
        let step = rr / curvature;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let ratio = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + ratio * *pi);
    }
    Err(Error::NotConverged { method: "conjugate gradient", iterations: max_iter, residual: rr.sqrt() / b_norm })
}
