use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operators::SparseOperator;

pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Full symmetric eigendecomposition `H = V Λ Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

pub fn dense_spectrum(op: &SparseOperator) -> Result<DenseSpectrum> {
    dense_spectrum_capped(op, DEFAULT_DENSE_CAP)
}

pub fn dense_spectrum_capped(op: &SparseOperator, cap: usize) -> Result<DenseSpectrum> {
    let dim = op.dim();
    if dim > cap {
        return Err(Error::DenseCap { dim, cap });
    }
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(DenseSpectrum { values, vectors })
}

impl DenseSpectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Column of `f(H)` at `source`: `Σ_k f(λ_k) v_k v_k(source)`.
    pub fn function_column(&self, source: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.dim();
        let weights: Vec<f64> = (0..n).map(|k| f(self.values[k]) * self.vectors[(source, k)]).collect();
        (0..n).map(|i| (0..n).map(|k| self.vectors[(i, k)] * weights[k]).sum()).collect()
    }

    /// `exp(−τH) e_source`.
    pub fn heat_kernel_column(&self, tau: f64, source: usize) -> Vec<f64> {
        self.function_column(source, |lam| (-tau * lam).exp())
    }

    /// `(z − H)⁻¹ e_source`.
    pub fn resolvent_column(&self, z: f64, source: usize) -> Vec<f64> {
        self.function_column(source, |lam| 1.0 / (z - lam))
    }

    /// Frobenius norm of `H − VΛVᵀ`.
    pub fn reconstruction_error(&self, op: &SparseOperator) -> f64 {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        let rebuilt = &self.vectors * lambda * self.vectors.transpose();
        (op.to_dense() - rebuilt).norm()
    }
}
