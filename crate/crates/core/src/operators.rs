//! Bath and coupled single-excitation Hamiltonians as symmetric sparse
//! matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::solvers::lowest_eigenpair;

const PAR_MATVEC_MIN_DIM: usize = 32_768;

/// Real symmetric sparse matrix in compressed-row form.
///
/// Both triangles are stored so that a row can be read without a transpose
/// pass, and the diagonal entry of every row is always present. The
/// constructor only accepts the upper triangle, which keeps the stored
/// matrix exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag_pos: Vec<usize>,
    /// Hopping rate J that sets the energy unit.
    hopping: f64,
}

impl SparseOperator {
    /// Builds from upper-triangle triplets `(i, j, v)` with `i <= j`.
    /// Repeated coordinates are summed.
    pub fn from_upper_triplets(dim: usize, hopping: f64, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = (0..dim).map(|i| vec![(i, 0.0)]).collect();
        for &(i, j, v) in triplets {
            if i > j || j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i}, {j}) is not in the upper triangle of a {dim}x{dim} matrix"
                )));
            }
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag_pos = Vec::with_capacity(dim);
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if cols.len() > row_ptr[i] && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    if c == i {
                        diag_pos.push(cols.len());
                    }
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseOperator { dim, row_ptr, cols, vals, diag_pos, hopping })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.vals[self.diag_pos[i]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// `y = A x`. Each row is accumulated in column order, so results do not
    /// depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let row = |i: usize| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>()
        };
        if self.dim >= PAR_MATVEC_MIN_DIM {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Copy with `shift` added to every diagonal entry.
    pub fn shifted(&self, shift: f64) -> SparseOperator {
        let mut out = self.clone();
        for &p in &out.diag_pos {
            out.vals[p] += shift;
        }
        out
    }

    /// Stored upper triangle `(i, j, v)`, `i <= j`, row-major.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).filter(move |(&c, _)| c >= i).map(move |(&c, &v)| (i, c, v))
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] = v;
            }
        }
        m
    }

    /// Test hook: overwrite one stored off-diagonal pair (or a diagonal
    /// entry) in place.
    #[doc(hidden)]
    pub fn corrupt_entry(&mut self, i: usize, j: usize, value: f64) {
        for (a, b) in [(i, j), (j, i)] {
            let (lo, hi) = (self.row_ptr[a], self.row_ptr[a + 1]);
            if let Ok(k) = self.cols[lo..hi].binary_search(&b) {
                self.vals[lo + k] = value;
            }
        }
    }
}

/// Bath Hamiltonian of a graph: `-J A`, or the Laplacian `J (D - A)` when
/// `laplacianize` is set.
pub fn bath_operator(graph: &Graph, hopping: f64, laplacianize: bool) -> SparseOperator {
    let n = graph.n_sites();
    let mut triplets = Vec::with_capacity(n + graph.n_edges());
    if laplacianize {
        triplets.extend((0..n).map(|i| (i, i, hopping * graph.degree(i) as f64)));
    }
    triplets.extend(graph.edges().map(|(i, j)| (i, j, -hopping)));
    SparseOperator::from_upper_triplets(n, hopping, &triplets).expect("graph edges are upper-triangular")
}

/// Two-level emitter attached to one bath site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterConfig {
    pub site: usize,
    /// Bare emitter frequency, same units and origin as the bath operator.
    pub omega_e: f64,
    pub coupling: f64,
}

impl EmitterConfig {
    /// Emitter tuned `delta_target` below the bath edge `e_min`.
    pub fn below_edge(site: usize, e_min: f64, delta_target: f64, coupling: f64) -> Result<Self> {
        if !(delta_target > 0.0) {
            return Err(Error::InvalidArgument(format!("target detuning {delta_target} must be positive")));
        }
        if !(coupling > 0.0) {
            return Err(Error::InvalidArgument(format!("coupling {coupling} must be positive")));
        }
        Ok(EmitterConfig { site, omega_e: e_min - delta_target, coupling })
    }
}

/// Weak-coupling default `g = min(ratio * delta, cap)`, with `ratio = 0.1`
/// and `cap = 1e-3 J`.
pub fn default_coupling(delta_target: f64, hopping: f64) -> f64 {
    (0.1 * delta_target).min(1e-3 * hopping)
}

/// Single-excitation Hamiltonian of bath plus emitter. The emitter is the
/// last basis index (`bath.dim()`).
pub fn coupled_hamiltonian(bath: &SparseOperator, emitter: &EmitterConfig) -> Result<SparseOperator> {
    let n = bath.dim();
    if emitter.site >= n {
        return Err(Error::SiteOutOfRange { site: emitter.site, n });
    }
    let mut triplets = bath.upper_triplets();
    triplets.push((emitter.site, n, emitter.coupling));
    triplets.push((n, n, emitter.omega_e));
    SparseOperator::from_upper_triplets(n + 1, bath.hopping(), &triplets)
}

/// Bath operator together with its lower spectral edge `E_min`.
#[derive(Debug, Clone)]
pub struct Bath {
    pub op: SparseOperator,
    pub e_min: f64,
    pub laplacian: bool,
}

impl Bath {
    /// Laplacianized bath; the edge is exactly zero.
    pub fn laplacian(graph: &Graph, hopping: f64) -> Self {
        Bath { op: bath_operator(graph, hopping, true), e_min: 0.0, laplacian: true }
    }

    /// Plain tight-binding bath `-J A` with the edge located numerically.
    pub fn tight_binding(graph: &Graph, hopping: f64, tol: f64) -> Result<Self> {
        let op = bath_operator(graph, hopping, false);
        let e_min = lowest_eigenpair(&op, tol)?.value;
        Ok(Bath { op, e_min, laplacian: false })
    }

    pub fn new(graph: &Graph, hopping: f64, laplacianize: bool, tol: f64) -> Result<Self> {
        if laplacianize {
            Ok(Self::laplacian(graph, hopping))
        } else {
            Self::tight_binding(graph, hopping, tol)
        }
    }
}
