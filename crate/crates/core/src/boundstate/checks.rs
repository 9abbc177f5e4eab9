//! Heat-kernel checks of the resolvent: the Laplace-transform identity
//! `G(r) = −∫₀^∞ e^{−Δτ} K(r, τ) dτ` and the sub-Gaussian envelope of `K`.

use log::debug;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{chemical_distances, FractalDimensions, Graph};
use crate::operators::{Bath, SparseOperator};
use crate::scaling::linear_fit;
use crate::solvers::{dense_spectrum, expm_action, solve_resolvent, DenseSpectrum, ExpmOptions, DEFAULT_DENSE_CAP};

/// Where heat-kernel columns come from.
pub enum KernelSource<'a> {
    Dense(&'a DenseSpectrum),
    Krylov { op: &'a SparseOperator, tol: f64 },
}

impl KernelSource<'_> {
    fn column(&self, tau: f64, source: usize) -> Result<Vec<f64>> {
        match self {
            KernelSource::Dense(spec) => Ok(spec.heat_kernel_column(tau, source)),
            KernelSource::Krylov { op, tol } => {
                let mut e = vec![0.0; op.dim()];
                e[source] = 1.0;
                expm_action(op, tau, &e, &ExpmOptions { tol: *tol, ..Default::default() })
            }
        }
    }

    fn spectral_radius(&self) -> f64 {
        match self {
            KernelSource::Dense(spec) => spec.values.iter().map(|v| v.abs()).fold(0.0, f64::max),
            KernelSource::Krylov { op, .. } => op.norm_bound(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Gauss-Legendre nodes per panel.
    pub points_per_panel: usize,
    /// Stop refining when successive estimates agree to this relative level.
    pub agreement: f64,
    pub max_refinements: usize,
    /// Sites where `|G|` is below this fraction of its peak are skipped:
    /// both sides are at round-off level there.
    pub relative_floor: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { points_per_panel: 8, agreement: 1e-8, max_refinements: 10, relative_floor: 1e-8 }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `∫₀^∞ e^{−Δτ} K(site, τ) dτ` for each of `sites` at one refinement
/// level. Panels grow geometrically from `1/‖H‖` up to `40/Δ`; level `ℓ`
/// splits every panel into `2^ℓ` equal pieces.
pub fn laplace_quadrature(
    kernel: &KernelSource,
    delta: f64,
    source: usize,
    sites: &[usize],
    level: usize,
    opts: &QuadratureOptions,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("detuning {delta} must be positive")));
    }
    let (nodes, weights) = gauss_legendre(opts.points_per_panel);
    let end = 40.0 / delta;
    let first = (0.5 / kernel.spectral_radius().max(delta)).min(end);
    let mut edges = vec![0.0, first];
    while *edges.last().unwrap() < end {
        let next = (2.0 * edges.last().unwrap()).min(end);
        edges.push(next);
    }
    let pieces = 1usize << level;
    let mut total = vec![0.0; sites.len()];
    for w in edges.windows(2) {
        let width = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let a = w[0] + p as f64 * width;
            for (x, wt) in nodes.iter().zip(&weights) {
                let tau = a + 0.5 * width * (x + 1.0);
                let col = kernel.column(tau, source)?;
                let f = 0.5 * width * wt * (-delta * tau).exp();
                for (t, &s) in total.iter_mut().zip(sites) {
                    *t += f * col[s];
                }
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelIdentityReport {
    pub max_relative_error: f64,
    /// Sites compared, after dropping those under the amplitude floor.
    pub sites: Vec<usize>,
    pub refinements: usize,
    /// `−∫ e^{−Δτ} K dτ` at the sample sites.
    pub quadrature: Vec<f64>,
    /// Resolvent column at the sample sites.
    pub resolvent: Vec<f64>,
}

/// Compares the Laplace transform of the heat kernel with a direct
/// resolvent solve at shift `E_min − Δ`. The kernel comes from the dense
/// oracle when the bath fits under its cap, otherwise from Krylov columns.
pub fn kernel_identity_check(
    bath: &Bath,
    delta: f64,
    source: usize,
    sites: &[usize],
    opts: &QuadratureOptions,
) -> Result<KernelIdentityReport> {
    if sites.is_empty() {
        return Err(Error::TooFewPoints { got: 0, need: 1 });
    }
    let shifted = bath.op.shifted(-bath.e_min);
    let direct = solve_resolvent(&shifted, -delta, source, 1e-14)?;
    let peak = direct.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sites: Vec<usize> = sites.iter().copied().filter(|&s| direct[s].abs() >= opts.relative_floor * peak).collect();
    let resolvent: Vec<f64> = sites.iter().map(|&s| direct[s]).collect();

    let dense = if shifted.dim() <= DEFAULT_DENSE_CAP { Some(dense_spectrum(&shifted)?) } else { None };
    let kernel = match &dense {
        Some(spec) => KernelSource::Dense(spec),
        None => KernelSource::Krylov { op: &shifted, tol: 1e-12 },
    };

    let mut prev = laplace_quadrature(&kernel, delta, source, &sites, 0, opts)?;
    let mut refinements = 0;
    for level in 1..=opts.max_refinements {
        let next = laplace_quadrature(&kernel, delta, source, &sites, level, opts)?;
        let change =
            next.iter().zip(&prev).map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        prev = next;
        refinements = level;
        if change <= opts.agreement {
            break;
        }
    }
    let quadrature: Vec<f64> = prev.iter().map(|v| -v).collect();
    let max_relative_error =
        quadrature.iter().zip(&resolvent).map(|(q, g)| (q - g).abs() / g.abs()).fold(0.0, f64::max);
    debug!("kernel identity: delta={delta:.3e} refinements={refinements} max_rel_err={max_relative_error:.3e}");
    Ok(KernelIdentityReport { max_relative_error, sites, refinements, quadrature, resolvent })
}

/// `c τ^{−d_s/2} exp[−C (d^{d_w}/τ)^{1/(d_w−1)}]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub c: f64,
    pub big_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub lower: EnvelopeFit,
    pub upper: EnvelopeFit,
    pub samples: usize,
    pub violations: usize,
    /// Log-log slope of the return amplitude `K(0, τ)` over the τ grid.
    pub return_slope: Option<f64>,
    pub return_slope_expected: f64,
}

/// Fits two-sided sub-Gaussian envelopes to heat-kernel samples.
///
/// In the variables `x = (d^{d_w}/τ)^{1/(d_w−1)}` and
/// `y = ln K + (d_s/2) ln τ` each envelope is a line `ln c − C x`. The
/// upper (lower) envelope is the supporting line of the upper (lower) convex
/// hull at the mean `x`, which minimizes the summed gap to the samples among
/// all lines that bound them. Only samples with `τ > d` enter.
pub fn sub_gaussian_envelope_check(
    graph: &Graph,
    bath: &Bath,
    dims: &FractalDimensions,
    source: usize,
    sites: &[usize],
    taus: &[f64],
    opts: &ExpmOptions,
) -> Result<EnvelopeReport> {
    let shifted = bath.op.shifted(-bath.e_min);
    let dist = chemical_distances(graph, source).dist;
    let mut taus: Vec<f64> = taus.iter().copied().filter(|t| *t > 0.0).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let d_w = dims.d_w;
    let mut points = Vec::new();
    let mut returns = Vec::new();
    let mut column = vec![0.0; shifted.dim()];
    column[source] = 1.0;
    let mut t_prev = 0.0;
    for &tau in &taus {
        column = expm_action(&shifted, tau - t_prev, &column, opts)?;
        t_prev = tau;
        returns.push((tau.ln(), column[source]));
        for &s in sites {
            let d = dist[s] as f64;
            let k = column[s];
            if tau > d && k > 0.0 {
                let x = (d.powf(d_w) / tau).powf(1.0 / (d_w - 1.0));
                let y = k.ln() + 0.5 * dims.d_s * tau.ln();
                points.push((x, y));
            }
        }
    }
    if points.len() < 3 {
        return Err(Error::TooFewPoints { got: points.len(), need: 3 });
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if points.first().unwrap().0 == points.last().unwrap().0 {
        return Err(Error::Degenerate("all envelope samples share one distance scale".into()));
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let upper_line = supporting_line(&points, mean_x, true);
    let lower_line = supporting_line(&points, mean_x, false);

    let slack = |y: f64| 1e-9 * (1.0 + y.abs());
    let violations = points
        .iter()
        .filter(|&&(x, y)| {
            y > upper_line.0 + upper_line.1 * x + slack(y) || y < lower_line.0 + lower_line.1 * x - slack(y)
        })
        .count()
        + [upper_line, lower_line].iter().filter(|l| !(l.1 < 0.0)).count();

    let ret: Vec<(f64, f64)> =
        returns.iter().filter(|(lt, k)| *lt >= 0.0 && *k > 0.0).map(|(lt, k)| (*lt, k.ln())).collect();
    let return_slope = if ret.len() >= 3 {
        let xs: Vec<f64> = ret.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = ret.iter().map(|p| p.1).collect();
        Some(linear_fit(&xs, &ys)?.slope)
    } else {
        None
    };

    Ok(EnvelopeReport {
        lower: EnvelopeFit { c: lower_line.0.exp(), big_c: -lower_line.1 },
        upper: EnvelopeFit { c: upper_line.0.exp(), big_c: -upper_line.1 },
        samples: points.len(),
        violations,
        return_slope,
        return_slope_expected: -0.5 * dims.d_s,
    })
}

/// `(intercept, slope)` of the hull edge above (or below) `at`.
fn supporting_line(sorted: &[(f64, f64)], at: f64, upper: bool) -> (f64, f64) {
    let sign = if upper { 1.0 } else { -1.0 };
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &(x, y) in sorted {
        let p = (x, sign * y);
        if let Some(last) = hull.last() {
            if last.0 == p.0 {
                // Same abscissa: keep the extreme ordinate (sorted ascending in y).
                if p.1 >= last.1 {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let k = hull.windows(2).position(|w| w[0].0 <= at && at <= w[1].0).unwrap_or(hull.len().saturating_sub(2));
    let (a, b) = (hull[k], hull[(k + 1).min(hull.len() - 1)]);
    let slope = if b.0 > a.0 { (b.1 - a.1) / (b.0 - a.0) } else { 0.0 };
    let intercept = a.1 - slope * a.0;
    (sign * intercept, sign * slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_graph, table_dimensions, FamilySpec};

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((approx - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn two_site_identity_is_exact() {
        // K = ½(1 ± e^{−2τ}), G = −½(1/Δ ± 1/(Δ + 2)).
        let graph = build_graph(&FamilySpec::Chain { length: 2 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        for &delta in &[0.05, 0.5, 3.0] {
            let rep = kernel_identity_check(&bath, delta, 0, &[0, 1], &QuadratureOptions::default()).unwrap();
            let exact = [-0.5 * (1.0 / delta + 1.0 / (delta + 2.0)), -0.5 * (1.0 / delta - 1.0 / (delta + 2.0))];
            for (i, e) in exact.iter().enumerate() {
                assert!((rep.resolvent[i] - e).abs() < 1e-13 * e.abs());
                assert!((rep.quadrature[i] - e).abs() < 1e-10 * e.abs());
            }
        }
    }

    #[test]
    fn quadrature_converges_under_refinement() {
        let graph = build_graph(&FamilySpec::GasketB2 { generation: 3 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let spec = dense_spectrum(&bath.op).unwrap();
        let exact: Vec<f64> = spec.resolvent_column(-0.05, 0).iter().map(|v| -v).collect();
        let sites = [0, 3, 9, 20];
        let kernel = KernelSource::Dense(&spec);
        let opts = QuadratureOptions { points_per_panel: 4, ..Default::default() };
        let errors: Vec<f64> = (0..4)
            .map(|lvl| {
                let q = laplace_quadrature(&kernel, 0.05, 0, &sites, lvl, &opts).unwrap();
                sites.iter().zip(&q).map(|(&s, v)| (v - exact[s]).abs() / exact[s].abs()).fold(0.0, f64::max)
            })
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] < w[0], "{errors:?}");
        }
    }

    #[test]
    fn gasket_kernel_identity() {
        let graph = build_graph(&FamilySpec::GasketB2 { generation: 3 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let sites: Vec<usize> = (0..graph.n_sites()).collect();
        let rep = kernel_identity_check(&bath, 0.05, 0, &sites, &QuadratureOptions::default()).unwrap();
        assert!(rep.max_relative_error <= 1e-6, "{}", rep.max_relative_error);
        assert_eq!(rep.sites.len(), sites.len());
    }

    #[test]
    fn far_chain_sites_fall_under_floor() {
        let graph = build_graph(&FamilySpec::Chain { length: 200 }).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let sites: Vec<usize> = (0..200).collect();
        let rep = kernel_identity_check(&bath, 0.5, 0, &sites, &QuadratureOptions::default()).unwrap();
        // G(r) ∝ e^{−r/ξ} with ξ = 1/arccosh(1.25): the floor cuts at r ≈ 26.
        let xi = 1.0 / 1.25f64.acosh();
        assert_eq!(rep.sites.len(), (1e8f64.ln() * xi).floor() as usize + 1);
        assert!(rep.max_relative_error <= 1e-6);
    }

    #[test]
    fn square_envelope_is_gaussian() {
        let spec = FamilySpec::Square { side: 21 };
        let graph = build_graph(&spec).unwrap();
        let bath = Bath::laplacian(&graph, 1.0);
        let dims = table_dimensions(&spec).unwrap();
        let source = 10 * 21 + 10;
        let sites: Vec<usize> = (0..graph.n_sites()).step_by(7).collect();
        let taus: Vec<f64> = (0..12).map(|k| 2.0 * 1.3f64.powi(k)).collect();
        let rep = sub_gaussian_envelope_check(
            &graph,
            &bath,
            &dims,
            source,
            &sites,
            &taus,
            &ExpmOptions { tol: 1e-11, ..Default::default() },
        )
        .unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.lower.big_c > 0.0 && rep.upper.big_c > 0.0);
        assert_eq!(rep.return_slope_expected, -1.0);
    }

    #[test]
    fn hull_lines_bound_points() {
        let pts = vec![(0.0, 0.0), (1.0, -0.7), (1.0, -1.3), (2.0, -2.1), (3.0, -2.9), (3.0, -3.2)];
        let up = supporting_line(&pts, 1.5, true);
        let lo = supporting_line(&pts, 1.5, false);
        for &(x, y) in &pts {
            assert!(y <= up.0 + up.1 * x + 1e-12);
            assert!(y >= lo.0 + lo.1 * x - 1e-12);
        }
    }
}
