//! Eigen, linear and exponential solvers on symmetric sparse operators,
//! plus a dense eigendecomposition used as a test oracle.

mod cg;
mod dense;
mod expm;
mod lanczos;
pub mod tridiag;

pub use cg::{solve_resolvent, solve_shifted, CgOptions, CgSolution};
pub use dense::{dense_spectrum, dense_spectrum_capped, DenseSpectrum, DEFAULT_DENSE_CAP};
pub use expm::{expm_action, heat_kernel_column, ExpmOptions, HeatKernelSample};
pub use lanczos::{lowest_eigenpair, lowest_eigenpair_with, Eigenpair, LanczosOptions};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a x`
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

pub(crate) fn scale(a: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= a);
}

/// Two passes of classical Gram-Schmidt of `w` against an orthonormal basis.
pub(crate) fn reorthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
}
