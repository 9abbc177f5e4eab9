//! The atom-photon bound state, its spatial profiles, and heat-kernel
//! cross-checks of the resolvent.
//!
//! Eliminating the emitter amplitude from the coupled eigenproblem gives
//! `ψ = g c_e (E − H)⁻¹ e_x0` and the pole condition
//! `E = ω_e + g² G(x0, x0; E)`. The default route solves that scalar
//! equation by Newton's method (each step is one shifted CG solve) and then
//! rebuilds the eigenvector from the converged resolvent column, which
//! keeps the exponentially small tail accurate. A Lanczos route on the full
//! `(N+1)`-dimensional matrix is kept as an independent check.

mod checks;

pub use checks::{
    kernel_identity_check, laplace_quadrature, sub_gaussian_envelope_check, EnvelopeFit, EnvelopeReport,
    KernelIdentityReport, KernelSource, QuadratureOptions,
};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{coupled_hamiltonian, Bath, EmitterConfig};
use crate::solvers::{self, lowest_eigenpair_with, solve_resolvent, solve_shifted, CgOptions, LanczosOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStateMethod {
    /// Newton iteration on the pole condition plus eigenvector reconstruction.
    Secular,
    /// Lanczos on the coupled matrix.
    Lanczos,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundStateOptions {
    pub method: BoundStateMethod,
    /// Residual target for the eigenpair of the coupled matrix.
    pub tol_eig: f64,
    /// Relative residual target for shifted linear solves.
    pub tol_lin: f64,
    pub max_newton: usize,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions { method: BoundStateMethod::Secular, tol_eig: 1e-10, tol_lin: 1e-12, max_newton: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    /// Spectral detuning `E_min − E_BS`.
    pub delta: f64,
    pub c_e: f64,
    pub psi: Vec<f64>,
    pub emitter: EmitterConfig,
    /// `‖H_c v − E v‖` of the assembled eigenvector.
    pub residual: f64,
}

impl BoundState {
    pub fn norm_squared(&self) -> f64 {
        self.c_e * self.c_e + self.psi.iter().map(|p| p * p).sum::<f64>()
    }
}

pub fn compute_bound_state(bath: &Bath, emitter: &EmitterConfig, opts: &BoundStateOptions) -> Result<BoundState> {
    let n = bath.op.dim();
    if emitter.site >= n {
        return Err(Error::SiteOutOfRange { site: emitter.site, n });
    }
    if !(emitter.omega_e < bath.e_min) {
        return Err(Error::InvalidArgument(format!(
            "emitter frequency {} must lie below the band edge {}",
            emitter.omega_e, bath.e_min
        )));
    }
    let (energy, c_e, psi) = match opts.method {
        BoundStateMethod::Secular => secular_route(bath, emitter, opts)?,
        BoundStateMethod::Lanczos => lanczos_route(bath, emitter, opts)?,
    };
    let delta = bath.e_min - energy;
    if !(delta > 0.0) {
        return Err(Error::NoBoundState { delta });
    }
    let residual = coupled_residual(bath, emitter, energy, c_e, &psi)?;
    debug!(
        "bound state: site={} E={energy:.15e} delta={delta:.6e} c_e={c_e:.12} residual={residual:.3e}",
        emitter.site
    );
    if residual > opts.tol_eig {
        return Err(Error::NotConverged { method: "bound state", iterations: 0, residual });
    }
    Ok(BoundState { energy, delta, c_e, psi, emitter: *emitter, residual })
}

fn secular_route(bath: &Bath, emitter: &EmitterConfig, opts: &BoundStateOptions) -> Result<(f64, f64, Vec<f64>)> {
    let op = &bath.op;
    let site = emitter.site;
    let g2 = emitter.coupling * emitter.coupling;
    let mut rhs = vec![0.0; op.dim()];
    rhs[site] = 1.0;
    let cg = CgOptions { tol: opts.tol_lin, max_iter: None };

    // f(E) = E − ω_e − g² G₀₀(E) is increasing and convex below the edge,
    // so Newton from E = ω_e decreases monotonically onto the root.
    let mut energy = emitter.omega_e;
    let mut x: Option<Vec<f64>> = None;
    let mut prev_step = f64::INFINITY;
    for it in 0..opts.max_newton {
        let sol = solve_shifted(op, energy, &rhs, x.as_deref(), &cg)?;
        let g00 = sol.x[site];
        let n2: f64 = sol.x.iter().map(|v| v * v).sum();
        let f = energy - emitter.omega_e - g2 * g00;
        let step = f / (1.0 + g2 * n2);
        x = Some(sol.x);
        let gap = bath.e_min - energy;
        // Once the step stops shrinking it is solver noise.
        let stalled = it >= 3 && step.abs() >= prev_step;
        if step.abs() <= 1e-13 * energy.abs().max(gap) || stalled {
            debug!("secular newton converged after {it} steps");
            let x = x.unwrap();
            let c_e = 1.0 / (1.0 + g2 * n2).sqrt();
            let psi = x.iter().map(|v| emitter.coupling * c_e * v).collect();
            return Ok((energy, c_e, psi));
        }
        prev_step = step.abs();
        let mut next = energy - step;
        if next >= bath.e_min {
            next = 0.5 * (energy + bath.e_min);
        }
        energy = next;
    }
    Err(Error::NotConverged { method: "secular newton", iterations: opts.max_newton, residual: f64::NAN })
}

fn lanczos_route(bath: &Bath, emitter: &EmitterConfig, opts: &BoundStateOptions) -> Result<(f64, f64, Vec<f64>)> {
    let h = coupled_hamiltonian(&bath.op, emitter)?;
    let pair = lowest_eigenpair_with(&h, &LanczosOptions { tol: opts.tol_eig, ..Default::default() })?;
    let n = bath.op.dim();
    let sign = if pair.vector[n] < 0.0 { -1.0 } else { 1.0 };
    let c_e = sign * pair.vector[n];
    let psi = pair.vector[..n].iter().map(|v| sign * v).collect();
    Ok((pair.value, c_e, psi))
}

fn coupled_residual(bath: &Bath, emitter: &EmitterConfig, energy: f64, c_e: f64, psi: &[f64]) -> Result<f64> {
    let h = coupled_hamiltonian(&bath.op, emitter)?;
    let mut v = psi.to_vec();
    v.push(c_e);
    let mut r = h.apply(&v);
    r.iter_mut().zip(&v).for_each(|(ri, vi)| *ri -= energy * vi);
    Ok(solvers::norm(&r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    BoundaryPointwise,
    BulkShellAverage,
}

/// Amplitudes against chemical distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub r: Vec<usize>,
    pub amp: Vec<f64>,
    pub kind: ProfileKind,
}

impl Profile {
    pub fn new(r: Vec<usize>, amp: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        if r.len() != amp.len() {
            return Err(Error::InvalidArgument(format!("{} distances but {} amplitudes", r.len(), amp.len())));
        }
        if r.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("profile distances must be strictly increasing".into()));
        }
        if amp.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidArgument("profile amplitudes must be non-negative".into()));
        }
        Ok(Profile { r, amp, kind })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Copy rescaled so the first amplitude is 1.
    pub fn unit_normalized(&self) -> Profile {
        let first = self.amp.first().copied().unwrap_or(1.0);
        let s = if first > 0.0 { 1.0 / first } else { 1.0 };
        Profile { r: self.r.clone(), amp: self.amp.iter().map(|a| a * s).collect(), kind: self.kind }
    }
}

/// `|ψ|` along a boundary path anchored at the emitter site.
pub fn boundary_profile(state: &BoundState, path: &[usize]) -> Result<Profile> {
    let anchor = *path.first().ok_or_else(|| Error::InvalidArgument("empty boundary path".into()))?;
    if anchor != state.emitter.site {
        return Err(Error::EmitterNotAtAnchor { site: state.emitter.site, anchor });
    }
    let amp = path.iter().map(|&s| state.psi[s].abs()).collect();
    Profile::new((0..path.len()).collect(), amp, ProfileKind::BoundaryPointwise)
}

/// `|G(r; E_min − Δ)|` along a path from its anchor, normalized to 1 at
/// the anchor.
pub fn resolvent_profile(bath: &Bath, delta: f64, path: &[usize], tol: f64) -> Result<Profile> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("detuning {delta} must be positive")));
    }
    let anchor = *path.first().ok_or_else(|| Error::InvalidArgument("empty boundary path".into()))?;
    let x = solve_resolvent(&bath.op, bath.e_min - delta, anchor, tol)?;
    let origin = x[anchor].abs();
    let amp = path.iter().map(|&s| x[s].abs() / origin).collect();
    Profile::new((0..path.len()).collect(), amp, ProfileKind::BoundaryPointwise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{boundary_path, build_graph, FamilySpec};
    use crate::operators::{coupled_hamiltonian, default_coupling};
    use crate::solvers::dense_spectrum;

    fn state_on(
        spec: FamilySpec,
        site_of: impl Fn(&crate::Graph) -> usize,
        delta: f64,
        g: f64,
    ) -> (crate::Graph, Bath, BoundState) {
        let graph = build_graph(&spec).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let em = EmitterConfig::below_edge(site_of(&graph), 0.0, delta, g).unwrap();
        let st = compute_bound_state(&bath, &em, &BoundStateOptions::default()).unwrap();
        (graph, bath, st)
    }

    #[test]
    fn single_site_hybridization() {
        let (delta, g) = (0.2, 0.05);
        let (_, _, st) = state_on(FamilySpec::Chain { length: 1 }, |_| 0, delta, g);
        let exact = (-delta - (delta * delta + 4.0 * g * g).sqrt()) / 2.0;
        assert!((st.energy - exact).abs() < 1e-14);
        assert!((st.psi[0] / st.c_e - g / exact).abs() < 1e-12);
        assert!((st.norm_squared() - 1.0).abs() < 1e-12);
        assert!(st.c_e > 0.0);
    }

    #[test]
    fn decoupled_limit() {
        let (_, _, st) = state_on(FamilySpec::GasketB2 { generation: 3 }, |_| 5, 0.05, 1e-7);
        assert!((st.c_e - 1.0).abs() < 1e-9);
        assert!((st.delta - 0.05).abs() < 1e-9);
    }

    #[test]
    fn matches_dense_oracle_and_lanczos() {
        let graph = build_graph(&FamilySpec::GasketB2 { generation: 4 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let em = EmitterConfig::below_edge(17, 0.0, 0.02, 0.002).unwrap();
        let secular = compute_bound_state(&bath, &em, &BoundStateOptions::default()).unwrap();
        let lanczos = compute_bound_state(
            &bath,
            &em,
            &BoundStateOptions { method: BoundStateMethod::Lanczos, ..Default::default() },
        )
        .unwrap();
        let dense = dense_spectrum(&coupled_hamiltonian(&bath.op, &em).unwrap()).unwrap();
        assert!((secular.energy - dense.values[0]).abs() < 1e-12);
        assert!((lanczos.energy - dense.values[0]).abs() < 1e-10);
        let n = bath.op.dim();
        let sign = dense.vectors[(n, 0)].signum();
        for i in 0..n {
            assert!((secular.psi[i] - sign * dense.vectors[(i, 0)]).abs() < 1e-10);
            assert!((lanczos.psi[i] - secular.psi[i]).abs() < 1e-8);
        }
        assert!((secular.c_e - sign * dense.vectors[(n, 0)]).abs() < 1e-10);
    }

    #[test]
    fn invariants_hold() {
        for spec in [FamilySpec::Vicsek { generation: 3 }, FamilySpec::Carpet { side: 3, hole: 1, generation: 3 }] {
            for &d in &[1e-3, 1e-2, 1e-1] {
                let (_, _, st) = state_on(spec, |g| g.boundary_paths()[0][0], d, default_coupling(d, 1.0));
                assert!(st.delta > 0.0);
                assert!((st.norm_squared() - 1.0).abs() < 1e-10);
                assert!(st.energy <= st.emitter.omega_e);
                let g = st.emitter.coupling;
                assert!((st.delta - d).abs() <= 10.0 * g * g / d);
            }
        }
    }

    #[test]
    fn chain_tail_matches_analytic_xi() {
        let (graph, _, st) = state_on(FamilySpec::Chain { length: 2000 }, |_| 0, 0.02, default_coupling(0.02, 1.0));
        let path = boundary_path(&graph, 0).unwrap();
        let prof = boundary_profile(&st, &path).unwrap();
        let xi = 1.0 / (1.0 + st.delta / 2.0).acosh();
        assert!((xi - 7.09).abs() < 0.02);
        let slope = (prof.amp[60].ln() - prof.amp[20].ln()) / 40.0;
        assert!(((-1.0 / slope) - xi).abs() <= 0.02 * xi);
        assert!(prof.amp.windows(2).take(200).all(|w| w[1] < w[0]));
    }

    #[test]
    fn profile_routes_agree() {
        let graph = build_graph(&FamilySpec::GasketB2 { generation: 4 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let path = boundary_path(&graph, graph.boundary_paths()[0][0]).unwrap();
        let delta = 0.01;
        let g = default_coupling(delta, 1.0);
        let em = EmitterConfig::below_edge(path[0], 0.0, delta, g).unwrap();
        let st = compute_bound_state(&bath, &em, &BoundStateOptions::default()).unwrap();
        let diag = boundary_profile(&st, &path).unwrap().unit_normalized();
        let res = resolvent_profile(&bath, delta, &path, 1e-12).unwrap();
        assert_eq!(diag.amp[0], st.psi[path[0]].abs() / st.psi[path[0]].abs());
        let bound = 1e3 * (g / delta).powi(2);
        for (a, b) in diag.amp.iter().zip(&res.amp) {
            assert!((a / b - 1.0).abs() <= bound);
        }
    }

    #[test]
    fn single_site_resolvent_profile() {
        let graph = build_graph(&FamilySpec::Chain { length: 1 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let p = resolvent_profile(&bath, 0.3, &[0], 1e-12).unwrap();
        assert_eq!(p.amp, vec![1.0]);
    }

    #[test]
    fn emitter_must_be_at_anchor() {
        let (graph, _, st) = state_on(FamilySpec::Square { side: 6 }, |_| 7, 0.1, 0.01);
        let path = boundary_path(&graph, 0).unwrap();
        assert!(matches!(boundary_profile(&st, &path), Err(Error::EmitterNotAtAnchor { .. })));
    }

    #[test]
    fn rejects_emitter_above_edge() {
        let graph = build_graph(&FamilySpec::Chain { length: 4 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let em = EmitterConfig { site: 0, omega_e: 0.5, coupling: 0.01 };
        assert!(compute_bound_state(&bath, &em, &BoundStateOptions::default()).is_err());
    }

    #[test]
    fn tight_binding_bath_shifts_edge() {
        let graph = build_graph(&FamilySpec::Square { side: 8 }).unwrap();
        let bath = Bath::tight_binding(&graph, 1.0, 1e-11).unwrap();
        let exact = -4.0 * (std::f64::consts::PI / 9.0).cos();
        assert!((bath.e_min - exact).abs() < 1e-9);
        let em = EmitterConfig::below_edge(0, bath.e_min, 0.05, 0.005).unwrap();
        let st = compute_bound_state(&bath, &em, &BoundStateOptions::default()).unwrap();
        assert!((st.delta - 0.05).abs() <= 10.0 * 0.005f64.powi(2) / 0.05);
    }
}
