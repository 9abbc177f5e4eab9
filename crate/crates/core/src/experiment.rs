//! End-to-end pipelines: far-field `ξ(Δ)` and `d_w`, near-field `δψ(r)` and
//! `β`, and the oracle verification suite.
//!
//! Independent solves run on the rayon pool; results are merged in input
//! order so reports are identical for any worker count.

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundstate::{
    boundary_profile, compute_bound_state, kernel_identity_check, sub_gaussian_envelope_check, BoundStateMethod,
    BoundStateOptions, Profile, ProfileKind, QuadratureOptions,
};
use crate::config::{ExperimentConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::graphs::{ball, boundary_path, build_graph, bulk_sites, table_dimensions, FamilySpec, Graph};
use crate::operators::{Bath, EmitterConfig};
use crate::scaling::{
    combine_shells, fit_beta, fit_walk_dimension, near_field_parameter, shell_differences, stratified_subsample,
    window_sweep, NearFieldCurve, ScalingFit, ShellSums, WindowSweep,
};
use crate::solvers::{dense_spectrum, lowest_eigenpair, solve_resolvent, ExpmOptions};

/// Columns every output row carries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub family: String,
    pub generation: u32,
    pub n_sites: usize,
    pub hopping: f64,
    pub laplacianize: bool,
    pub tol_eig: f64,
    pub tol_lin: f64,
    pub version: &'static str,
}

impl Provenance {
    pub fn new(graph: &Graph, cfg: &ExperimentConfig) -> Self {
        Provenance {
            family: graph.spec().family_name(),
            generation: graph.spec().generation(),
            n_sites: graph.n_sites(),
            hopping: cfg.physics.hopping,
            laplacianize: cfg.physics.laplacianize,
            tol_eig: cfg.solver.tol_eig,
            tol_lin: cfg.solver.tol_lin,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarFieldPoint {
    pub delta_target: f64,
    pub delta_measured: f64,
    pub coupling: f64,
    pub xi: f64,
    /// `ξ·Δ^{1/2}`, flat for a regular lattice.
    pub xi_rescaled: f64,
    pub c_e: f64,
    pub residual: f64,
    pub sweep: WindowSweep,
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaFailure {
    pub delta: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarFieldReport {
    pub provenance: Provenance,
    pub emitter_site: usize,
    /// How the profiles were produced: `secular` or `synthetic`.
    pub route: &'static str,
    pub points: Vec<FarFieldPoint>,
    pub failures: Vec<DeltaFailure>,
    pub fit: Option<ScalingFit>,
    pub d_w_fit: Option<f64>,
    pub d_w_stderr: Option<f64>,
    pub d_w_theory: Option<f64>,
}

/// Emitter site for the far-field run: start of boundary path `anchor`.
pub fn anchor_site(graph: &Graph, anchor: usize) -> Result<usize> {
    let paths = graph.boundary_paths();
    if paths.is_empty() {
        return Err(Error::Degenerate(format!("{} has no boundary path", graph.spec())));
    }
    paths
        .get(anchor)
        .and_then(|p| p.first().copied())
        .ok_or_else(|| Error::InvalidArgument(format!("anchor {anchor} out of range ({} corners)", paths.len())))
}

pub fn bath_for(graph: &Graph, cfg: &ExperimentConfig) -> Result<Bath> {
    Bath::new(graph, cfg.physics.hopping, cfg.physics.laplacianize, cfg.solver.tol_eig * 1e-2)
}

pub fn run_farfield(cfg: &ExperimentConfig) -> Result<FarFieldReport> {
    let graph = build_graph(&cfg.lattice)?;
    farfield_on(&graph, cfg)
}

/// Bound state at each detuning with the emitter on a boundary corner,
/// window-swept `ξ` along the boundary, then the `d_w` regression. A
/// failing detuning is logged and left out of the fit.
pub fn farfield_on(graph: &Graph, cfg: &ExperimentConfig) -> Result<FarFieldReport> {
    let bath = bath_for(graph, cfg)?;
    let site = anchor_site(graph, cfg.farfield.anchor)?;
    let path = boundary_path(graph, site)?;
    let sweep = cfg.farfield.sweep();
    let opts = cfg.solver.bound_state();
    let hopping = cfg.physics.hopping;
    let deltas = cfg.physics.delta_grid.values();

    let outcomes: Vec<Result<FarFieldPoint>> = deltas
        .par_iter()
        .map(|&delta| {
            let g = cfg.physics.coupling.coupling(delta, hopping);
            let emitter = EmitterConfig::below_edge(site, bath.e_min, delta, g)?;
            let state = compute_bound_state(&bath, &emitter, &opts)?;
            let profile = boundary_profile(&state, &path)?;
            let swept = window_sweep(&profile, &sweep)?;
            Ok(FarFieldPoint {
                delta_target: delta,
                delta_measured: state.delta,
                coupling: g,
                xi: swept.xi_mean,
                xi_rescaled: swept.xi_mean * state.delta.sqrt(),
                c_e: state.c_e,
                residual: state.residual,
                sweep: swept,
                profile,
            })
        })
        .collect();

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (delta, out) in deltas.iter().zip(outcomes) {
        match out {
            Ok(p) => {
                info!("{}: delta={:.4e} xi={:.4}", graph.spec(), p.delta_measured, p.xi);
                points.push(p);
            }
            Err(e) => {
                warn!("{}: delta={delta:.4e} failed: {e}", graph.spec());
                failures.push(DeltaFailure { delta: *delta, error: e.to_string() });
            }
        }
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.delta_measured / hopping, p.xi)).collect();
    let fit = match fit_walk_dimension(&pairs) {
        Ok(f) => Some(f),
        Err(e) => {
            warn!("{}: walk-dimension fit failed: {e}", graph.spec());
            None
        }
    };
    Ok(FarFieldReport {
        provenance: Provenance::new(graph, cfg),
        emitter_site: site,
        route: "secular",
        d_w_fit: fit.as_ref().map(|f| f.walk_dimension()),
        d_w_stderr: fit.as_ref().map(|f| f.walk_dimension_stderr()),
        d_w_theory: table_dimensions(graph.spec()).ok().map(|d| d.d_w),
        points,
        failures,
        fit,
    })
}

/// Exact far-field model `A(r) = r^{−(d−1)/2} e^{−r/ξ}` with
/// `ξ = prefactor·Δ^{−1/d_w}`, fed through the same sweep and regression as
/// measured profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticModel {
    pub prefactor: f64,
    pub d: f64,
    pub d_w: f64,
}

impl SyntheticModel {
    pub fn xi(&self, delta: f64) -> f64 {
        self.prefactor * delta.powf(-1.0 / self.d_w)
    }

    pub fn profile(&self, delta: f64, len: usize) -> Result<Profile> {
        let xi = self.xi(delta);
        let r: Vec<usize> = (0..len).collect();
        let amp = r
            .iter()
            .map(|&r| if r == 0 { 1.0 } else { (r as f64).powf(-(self.d - 1.0) / 2.0) * (-(r as f64) / xi).exp() })
            .collect();
        Profile::new(r, amp, ProfileKind::BoundaryPointwise)
    }
}

pub fn synthetic_farfield(model: &SyntheticModel, cfg: &ExperimentConfig) -> Result<FarFieldReport> {
    if !(model.prefactor > 0.0 && model.d >= 1.0 && model.d_w > 1.0) {
        return Err(Error::InvalidParams(format!("synthetic model {model:?}")));
    }
    let deltas = cfg.physics.delta_grid.values();
    let xi_max = deltas.iter().map(|&d| model.xi(d)).fold(0.0, f64::max);
    // Long enough for the amplitude to fall below the sweep floor.
    let len = (xi_max * (1.0 / cfg.farfield.floor_ratio).ln()).ceil() as usize + 2 * cfg.farfield.r_min + 2;
    let sweep = cfg.farfield.sweep();
    let mut points = Vec::new();
    for &delta in &deltas {
        let profile = model.profile(delta, len)?;
        let swept = window_sweep(&profile, &sweep)?;
        points.push(FarFieldPoint {
            delta_target: delta,
            delta_measured: delta,
            coupling: 0.0,
            xi: swept.xi_mean,
            xi_rescaled: swept.xi_mean * delta.sqrt(),
            c_e: 1.0,
            residual: 0.0,
            sweep: swept,
            profile,
        });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.delta_measured, p.xi)).collect();
    let fit = fit_walk_dimension(&pairs)?;
    Ok(FarFieldReport {
        provenance: Provenance {
            family: "synthetic".into(),
            generation: 0,
            n_sites: len,
            hopping: cfg.physics.hopping,
            laplacianize: cfg.physics.laplacianize,
            tol_eig: cfg.solver.tol_eig,
            tol_lin: cfg.solver.tol_lin,
            version: env!("CARGO_PKG_VERSION"),
        },
        emitter_site: 0,
        route: "synthetic",
        points,
        failures: Vec::new(),
        d_w_fit: Some(fit.walk_dimension()),
        d_w_stderr: Some(fit.walk_dimension_stderr()),
        d_w_theory: Some(model.d_w),
        fit: Some(fit),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearFieldReport {
    pub provenance: Provenance,
    pub delta_target: f64,
    pub delta_measured: [f64; 2],
    pub coupling: f64,
    pub r_bulk: u32,
    pub bulk_sites: usize,
    pub emitters: Vec<usize>,
    pub curve: NearFieldCurve,
    pub fit: ScalingFit,
    pub beta_fit: f64,
    pub beta_stderr: f64,
    pub beta_theory: Option<f64>,
    /// `|β_fit − β_theory| > 2·stderr`.
    pub deviates: Option<bool>,
    /// `r_max^{d_w} Δ` with tabulated `d_w`.
    pub near_field_parameter: Option<f64>,
}

pub fn run_nearfield(cfg: &ExperimentConfig) -> Result<NearFieldReport> {
    let graph = build_graph(&cfg.lattice)?;
    nearfield_on(&graph, cfg)
}

/// Bound states for a stratified subsample of bulk emitters, averaged
/// `|ψ(x₀) − ψ(x)|` over bulk pairs at each distance, and the `β` fit.
pub fn nearfield_on(graph: &Graph, cfg: &ExperimentConfig) -> Result<NearFieldReport> {
    let nf = &cfg.nearfield;
    let bath = bath_for(graph, cfg)?;
    let r_max = nf.r_window[1] as u32;
    let (r_bulk, bulk) = bulk_with_radius(graph, nf.r_bulk, nf.min_bulk_sites, r_max, nf.emitter_cap)?;
    let mut in_bulk = vec![false; graph.n_sites()];
    bulk.iter().for_each(|&s| in_bulk[s] = true);
    let emitters = stratified_subsample(&bulk, nf.emitter_cap);
    let dims = table_dimensions(graph.spec()).ok();
    let parameter = dims.map(|d| near_field_parameter(r_max, d.d_w, nf.delta));
    if let Some(p) = parameter.filter(|p| *p > 1.0) {
        warn!("{}: r^d_w·Δ = {p:.3} at r = {r_max}; outside the near-field regime", graph.spec());
    }
    let g = cfg.physics.coupling.coupling(nf.delta, cfg.physics.hopping);
    let opts = cfg.solver.bound_state();

    let per_emitter: Vec<(f64, ShellSums)> = emitters
        .par_iter()
        .map(|&site| {
            let emitter = EmitterConfig::below_edge(site, bath.e_min, nf.delta, g)?;
            let state = compute_bound_state(&bath, &emitter, &opts)?;
            Ok((state.delta, shell_differences(graph, &in_bulk, site, &state.psi, r_max)?))
        })
        .collect::<Result<_>>()?;
    let measured = per_emitter.iter().map(|p| p.0);
    let delta_measured = [measured.clone().fold(f64::INFINITY, f64::min), measured.fold(0.0, f64::max)];
    let shells: Vec<_> = per_emitter.into_iter().map(|p| p.1).collect();
    let curve = combine_shells(&shells, r_max)?;
    let fit = fit_beta(&curve.profile, nf.r_window)?;
    let beta_theory = dims.and_then(|d| d.beta);
    info!("{}: beta={:.4} ± {:.4} over {} emitters", graph.spec(), fit.exponent, fit.stderr, emitters.len());
    Ok(NearFieldReport {
        provenance: Provenance::new(graph, cfg),
        delta_target: nf.delta,
        delta_measured,
        coupling: g,
        r_bulk,
        bulk_sites: bulk.len(),
        emitters,
        beta_fit: fit.exponent,
        beta_stderr: fit.stderr,
        deviates: beta_theory.map(|b| (fit.exponent - b).abs() > 2.0 * fit.stderr),
        beta_theory,
        near_field_parameter: parameter,
        curve,
        fit,
    })
}

/// Bulk sites at the largest radius `≤ r_max` that keeps at least
/// `min_sites` of them and whose emitter subsample still sees bulk pairs
/// at every distance up to `reach`. Deep bulks of small or porous graphs
/// break into islands narrower than the fit window.
pub fn bulk_with_radius(
    graph: &Graph,
    r_max: u32,
    min_sites: usize,
    reach: u32,
    emitter_cap: usize,
) -> Result<(u32, Vec<usize>)> {
    let mut fallback = None;
    for r in (0..=r_max).rev() {
        let bulk = bulk_sites(graph, r);
        if bulk.len() >= min_sites && covers_window(graph, &bulk, reach, emitter_cap) {
            if r < r_max {
                info!("{}: bulk radius lowered to {r} ({} sites)", graph.spec(), bulk.len());
            }
            return Ok((r, bulk));
        }
        if !bulk.is_empty() {
            fallback = Some((r, bulk));
        }
    }
    fallback.ok_or(Error::EmptyBulk(0)).inspect(|(r, b)| {
        warn!("{}: no bulk radius covers the window; using radius {r} ({} sites)", graph.spec(), b.len());
    })
}

fn covers_window(graph: &Graph, bulk: &[usize], reach: u32, emitter_cap: usize) -> bool {
    let mut in_bulk = vec![false; graph.n_sites()];
    bulk.iter().for_each(|&s| in_bulk[s] = true);
    let mut seen = vec![false; reach as usize + 1];
    for e in stratified_subsample(bulk, emitter_cap) {
        for (s, d) in ball(graph, e, reach) {
            if in_bulk[s] {
                seen[d as usize] = true;
            }
        }
    }
    seen[1..].iter().all(|&x| x)
}

/// Deliberate defects for exercising the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Perturbs one diagonal entry of every bath operator.
    CorruptOperator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: String, value: f64, tolerance: f64) -> CheckResult {
    CheckResult { passed: value.is_finite() && value <= tolerance, name, value, tolerance }
}

fn verify_bath(graph: &Graph, fault: Option<Fault>) -> Bath {
    let mut bath = Bath::laplacian(graph, 1.0);
    if fault == Some(Fault::CorruptOperator) {
        bath.op.corrupt_entry(0, 0, bath.op.diagonal(0) + 0.25);
    }
    bath
}

fn failed(name: String, e: &Error) -> CheckResult {
    warn!("{name}: {e}");
    CheckResult { name, passed: false, value: f64::NAN, tolerance: 0.0 }
}

/// Small-graph oracle suite: Laplacian invariants, the two-site closed
/// form, the resolvent–heat-kernel identity, heat-kernel envelopes and the
/// agreement of the two bound-state routes with a dense oracle.
pub fn run_verify(solver: &SolverConfig, fault: Option<Fault>) -> VerifyReport {
    let mut checks = Vec::new();
    let families = [
        FamilySpec::Chain { length: 64 },
        FamilySpec::Square { side: 12 },
        FamilySpec::GasketB2 { generation: 4 },
        FamilySpec::GasketB3 { generation: 3 },
        FamilySpec::PyramidB2 { generation: 3 },
        FamilySpec::Vicsek { generation: 3 },
        FamilySpec::Carpet { side: 3, hole: 1, generation: 3 },
        FamilySpec::Carpet { side: 4, hole: 2, generation: 2 },
    ];
    for spec in families {
        let graph = build_graph(&spec).expect("suite graphs are small");
        let bath = verify_bath(&graph, fault);
        let n = graph.n_sites();
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        let kernel = bath.op.apply(&ones).iter().map(|v| v.abs()).fold(0.0, f64::max);
        checks.push(check(format!("laplacian constant kernel [{spec}]"), kernel, 1e-10));
        match lowest_eigenpair(&bath.op, 1e-12) {
            Ok(pair) => checks.push(check(format!("laplacian edge E_min = 0 [{spec}]"), pair.value.abs(), 1e-10)),
            Err(e) => checks.push(failed(format!("laplacian edge E_min = 0 [{spec}]"), &e)),
        }
    }

    let pair = build_graph(&FamilySpec::Chain { length: 2 }).unwrap();
    let bath = verify_bath(&pair, fault);
    for &delta in &[0.05, 0.5] {
        let name = format!("two-site resolvent closed form [delta={delta}]");
        match solve_resolvent(&bath.op, -delta, 0, 1e-14) {
            Ok(x) => {
                let exact = [-0.5 * (1.0 / delta + 1.0 / (delta + 2.0)), -0.5 * (1.0 / delta - 1.0 / (delta + 2.0))];
                let err = (0..2).map(|i| (x[i] - exact[i]).abs() / exact[i].abs()).fold(0.0, f64::max);
                checks.push(check(name, err, 1e-12));
            }
            Err(e) => checks.push(failed(name, &e)),
        }
    }

    for spec in [FamilySpec::GasketB2 { generation: 3 }, FamilySpec::Chain { length: 200 }] {
        let graph = build_graph(&spec).unwrap();
        let bath = verify_bath(&graph, fault);
        let sites: Vec<usize> = (0..graph.n_sites()).collect();
        for &delta in &[0.05, 0.5] {
            let name = format!("kernel identity [{spec}, delta={delta}]");
            match kernel_identity_check(&bath, delta, 0, &sites, &QuadratureOptions::default()) {
                Ok(rep) => checks.push(check(name, rep.max_relative_error, 1e-6)),
                Err(e) => checks.push(failed(name, &e)),
            }
        }
    }

    let spec = FamilySpec::GasketB2 { generation: 5 };
    let graph = build_graph(&spec).unwrap();
    let bath = verify_bath(&graph, fault);
    let dims = table_dimensions(&spec).unwrap();
    let source = bulk_sites(&graph, 4).first().copied().unwrap_or(0);
    let sites: Vec<usize> = (0..graph.n_sites()).collect();
    let taus: Vec<f64> = crate::config::log_spaced(1.0, 10.0, 9);
    let expm = ExpmOptions { tol: 1e-12, krylov_cap: solver.krylov_cap, ..Default::default() };
    match sub_gaussian_envelope_check(&graph, &bath, &dims, source, &sites, &taus, &expm) {
        Ok(rep) => {
            checks.push(check(format!("sub-gaussian envelope violations [{spec}]"), rep.violations as f64, 0.0));
            let slope_err = rep.return_slope.map_or(f64::NAN, |s| (s - rep.return_slope_expected).abs());
            checks.push(check(format!("return amplitude slope -d_s/2 [{spec}]"), slope_err, 0.1));
        }
        Err(e) => checks.push(failed(format!("sub-gaussian envelope [{spec}]"), &e)),
    }

    let spec = FamilySpec::GasketB2 { generation: 3 };
    let graph = build_graph(&spec).unwrap();
    let bath = verify_bath(&graph, fault);
    let emitter = EmitterConfig::below_edge(0, bath.e_min, 0.05, 5e-3).unwrap();
    let name = format!("bound-state routes vs dense oracle [{spec}]");
    let routes = [BoundStateMethod::Secular, BoundStateMethod::Lanczos]
        .map(|method| compute_bound_state(&bath, &emitter, &BoundStateOptions { method, ..Default::default() }));
    let dense = crate::operators::coupled_hamiltonian(&bath.op, &emitter).and_then(|h| dense_spectrum(&h));
    match (routes, dense) {
        ([Ok(a), Ok(b)], Ok(spec_h)) => {
            let exact = spec_h.values[0];
            let err = (a.energy - exact).abs().max((b.energy - exact).abs());
            checks.push(check(name, err, 1e-10));
        }
        (_, Err(e)) | ([Err(e), _], _) | ([_, Err(e)], _) => checks.push(failed(name, &e)),
    }
    VerifyReport { checks }
}

/// Desk- or paper-scale family sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scale {
    Desk,
    Paper,
}

/// Families of the far-field figure.
pub fn figure2_families(scale: Scale) -> Vec<FamilySpec> {
    let (b2, b3, c91, c164, pyr, vic, side) = match scale {
        Scale::Desk => (6, 4, 4, 3, 5, 4, 101),
        Scale::Paper => (7, 5, 5, 4, 6, 5, 151),
    };
    vec![
        FamilySpec::GasketB2 { generation: b2 },
        FamilySpec::GasketB3 { generation: b3 },
        FamilySpec::Carpet { side: 3, hole: 1, generation: c91 },
        FamilySpec::Carpet { side: 4, hole: 2, generation: c164 },
        FamilySpec::PyramidB2 { generation: pyr },
        FamilySpec::Vicsek { generation: vic },
        FamilySpec::Square { side },
    ]
}

/// Families of the near-field figure.
pub fn figure4_families(scale: Scale) -> Vec<FamilySpec> {
    let (b2, b3, pyr, vic, c91, c164) = match scale {
        Scale::Desk => (5, 4, 4, 4, 4, 3),
        Scale::Paper => (7, 5, 6, 5, 5, 4),
    };
    vec![
        FamilySpec::GasketB2 { generation: b2 },
        FamilySpec::GasketB3 { generation: b3 },
        FamilySpec::PyramidB2 { generation: pyr },
        FamilySpec::Vicsek { generation: vic },
        FamilySpec::Carpet { side: 3, hole: 1, generation: c91 },
        FamilySpec::Carpet { side: 4, hole: 2, generation: c164 },
    ]
}
