//! Far-field localization length and walk dimension, near-field exponent,
//! and the closed-form saddle point of the diffusion action.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boundstate::{Profile, ProfileKind};
use crate::error::{Error, Result};
use crate::graphs::{ball, bulk_sites, Graph};

/// Amplitudes below this are treated as underflow and end a fit window.
pub const UNDERFLOW_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub rss: f64,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidArgument(format!("{n} abscissae but {} ordinates", y.len())));
    }
    if n < 2 {
        return Err(Error::TooFewPoints { got: n, need: 2 });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
    let slope_stderr = if n > 2 { (rss / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, slope_stderr, rss })
}

/// One far-field regression `log amp² = logC − (d−1) log r − (2/ξ) r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindowResult {
    /// Inclusive distance range actually fitted.
    pub window: [usize; 2],
    pub log_c: f64,
    pub d_exp: f64,
    pub xi: f64,
    pub rss: f64,
}

pub fn fit_far_field_window(profile: &Profile, window: [usize; 2]) -> Result<FitWindowResult> {
    if profile.kind != ProfileKind::BoundaryPointwise {
        return Err(Error::InvalidArgument("far-field fits need a pointwise boundary profile".into()));
    }
    let [lo, hi] = window;
    if lo == 0 {
        return Err(Error::InvalidArgument("far-field window must start at r ≥ 1".into()));
    }
    let mut rows = Vec::new();
    for (&r, &a) in profile.r.iter().zip(&profile.amp) {
        if r < lo || r > hi {
            continue;
        }
        if a < UNDERFLOW_GUARD {
            break;
        }
        rows.push((r as f64, 2.0 * a.ln()));
    }
    if rows.len() < 4 {
        return Err(Error::TooFewPoints { got: rows.len(), need: 4 });
    }
    let n = rows.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => rows[i].0.ln(),
        _ => rows[i].0,
    });
    let y = DVector::from_iterator(n, rows.iter().map(|p| p.1));
    let coef = design.clone().svd(true, true).solve(&y, 1e-14).map_err(|e| Error::Degenerate(e.to_string()))?;
    let (log_c, b, c) = (coef[0], coef[1], coef[2]);
    let fitted_hi = rows.last().unwrap().0 as usize;
    let fitted_lo = rows[0].0 as usize;
    if !(c < 0.0) {
        return Err(Error::NonDecaying { lo: fitted_lo, hi: fitted_hi, slope: c });
    }
    let rss = (design * &coef - y).norm_squared();
    Ok(FitWindowResult { window: [fitted_lo, fitted_hi], log_c, d_exp: 1.0 - b, xi: -2.0 / c, rss })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub r_min: usize,
    pub step: usize,
    /// Number of consecutive windows in the rolling variance.
    pub width: usize,
    /// Points whose amplitude falls below this fraction of the profile
    /// maximum are cut before sweeping, since solver error dominates there.
    pub floor_ratio: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { r_min: 5, step: 5, width: 5, floor_ratio: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    /// First distance dropped by the amplitude floor, if any.
    pub truncated_at: Option<usize>,
    /// `(r_max, reason)` for windows whose regression failed.
    pub rejected: Vec<(usize, String)>,
    /// Rolling variance of `d` ending at each accepted window.
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSweep {
    pub xi_mean: f64,
    /// `[r_min, first r_max, last r_max]` of the plateau.
    pub plateau: [usize; 3],
    pub plateau_windows: Vec<FitWindowResult>,
    pub windows: Vec<FitWindowResult>,
    pub diagnostics: SweepDiagnostics,
}

/// Grows the upper end of the fit window in steps and takes `ξ` as the
/// mean over the run of windows where the fitted `d` varies least.
pub fn window_sweep(profile: &Profile, opts: &SweepOptions) -> Result<WindowSweep> {
    if opts.step == 0 || opts.width < 2 || opts.r_min == 0 {
        return Err(Error::InvalidArgument("sweep needs r_min ≥ 1, step ≥ 1 and width ≥ 2".into()));
    }
    let peak = profile.amp.iter().copied().fold(0.0, f64::max);
    let floor = (peak * opts.floor_ratio).max(UNDERFLOW_GUARD);
    let cut = profile.amp.iter().position(|&a| a < floor);
    let truncated_at = cut.map(|i| profile.r[i]);
    let r_end = match cut {
        Some(0) => 0,
        Some(i) => profile.r[i - 1],
        None => profile.r.last().copied().unwrap_or(0),
    };
    if let Some(r) = truncated_at {
        debug!("window sweep: amplitude floor reached at r={r}");
    }

    let mut windows = Vec::new();
    let mut rejected = Vec::new();
    let mut r_max = opts.r_min + opts.step;
    while r_max <= r_end {
        match fit_far_field_window(profile, [opts.r_min, r_max]) {
            Ok(fit) => windows.push(fit),
            Err(e) => rejected.push((r_max, e.to_string())),
        }
        r_max += opts.step;
    }
    if windows.is_empty() && !rejected.is_empty() {
        return Err(Error::NonDecaying { lo: opts.r_min, hi: r_end, slope: 0.0 });
    }
    if windows.len() < opts.width {
        return Err(Error::TooFewPoints { got: windows.len(), need: opts.width });
    }

    let variances: Vec<f64> = windows
        .windows(opts.width)
        .map(|group| {
            let m = group.iter().map(|f| f.d_exp).sum::<f64>() / group.len() as f64;
            group.iter().map(|f| (f.d_exp - m).powi(2)).sum::<f64>() / group.len() as f64
        })
        .collect();
    let min_var = variances.iter().copied().fold(f64::INFINITY, f64::min);
    // Groups tied with the minimum extend the plateau; the earliest wins.
    let tie = |v: f64| v <= min_var * (1.0 + 1e-9) + 1e-20;
    let first = variances.iter().position(|&v| tie(v)).unwrap();
    let mut last = first;
    while last + 1 < variances.len() && tie(variances[last + 1]) {
        last += 1;
    }
    let plateau_windows = windows[first..last + opts.width].to_vec();
    let xi_mean = plateau_windows.iter().map(|f| f.xi).sum::<f64>() / plateau_windows.len() as f64;
    let plateau = [opts.r_min, plateau_windows[0].window[1], plateau_windows.last().unwrap().window[1]];
    debug!("window sweep: {} windows, plateau {:?}, xi={xi_mean:.6}", windows.len(), plateau);
    Ok(WindowSweep {
        xi_mean,
        plateau,
        plateau_windows,
        windows,
        diagnostics: SweepDiagnostics { truncated_at, rejected, variances },
    })
}

/// Power-law regression in log-log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: Vec<(f64, f64)>,
    pub window: [f64; 2],
}

impl ScalingFit {
    /// `d_w = 1/exponent` for a fit of `ξ ∼ Δ^{−1/d_w}`.
    pub fn walk_dimension(&self) -> f64 {
        1.0 / self.exponent
    }

    pub fn walk_dimension_stderr(&self) -> f64 {
        self.stderr / (self.exponent * self.exponent)
    }
}

fn log_log_fit(points: &[(f64, f64)], sign: f64) -> Result<ScalingFit> {
    for &(x, y) in points {
        if !(x > 0.0) {
            return Err(Error::InvalidArgument(format!("log-log abscissa {x} must be positive")));
        }
        if !(y > 0.0) {
            return Err(Error::NonPositive { r: x as usize, value: y });
        }
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let line = linear_fit(&lx, &ly)?;
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(ScalingFit {
        exponent: sign * line.slope,
        stderr: line.slope_stderr,
        intercept: line.intercept,
        points: points.to_vec(),
        window: [lo, hi],
    })
}

/// Fits `ξ ∼ Δ^{−1/d_w}`; `exponent` is `1/d_w`.
pub fn fit_walk_dimension(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints { got: points.len(), need: 4 });
    }
    let fit = log_log_fit(points, -1.0)?;
    if fit.window[1] < 10.0 * fit.window[0] * (1.0 - 1e-3) {
        return Err(Error::Degenerate(format!(
            "detunings span [{:.3e}, {:.3e}], less than a decade",
            fit.window[0], fit.window[1]
        )));
    }
    if !(fit.exponent > 0.0) {
        return Err(Error::Degenerate(format!("localization length grows with detuning (slope {})", -fit.exponent)));
    }
    Ok(fit)
}

/// Fits `δψ ∼ r^β` over `window` (inclusive).
pub fn fit_beta(curve: &Profile, window: [usize; 2]) -> Result<ScalingFit> {
    let points: Vec<(f64, f64)> = curve
        .r
        .iter()
        .zip(&curve.amp)
        .filter(|(r, _)| window[0] <= **r && **r <= window[1])
        .map(|(&r, &a)| (r as f64, a))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewPoints { got: points.len(), need: 3 });
    }
    log_log_fit(&points, 1.0)
}

/// Per-emitter shell sums of `|ψ(x₀) − ψ(x)|` over bulk sites `x` at
/// chemical distance `r = 1..=r_max` from `x₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSums {
    pub emitter: usize,
    pub sums: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn shell_differences(
    graph: &Graph,
    in_bulk: &[bool],
    emitter: usize,
    psi: &[f64],
    r_max: u32,
) -> Result<ShellSums> {
    if emitter >= graph.n_sites() {
        return Err(Error::SiteOutOfRange { site: emitter, n: graph.n_sites() });
    }
    if !in_bulk[emitter] {
        return Err(Error::InvalidArgument(format!("emitter site {emitter} is not in the bulk")));
    }
    let mut sums = vec![0.0; r_max as usize + 1];
    let mut counts = vec![0; r_max as usize + 1];
    let mut shell = ball(graph, emitter, r_max);
    shell.sort_unstable_by_key(|&(s, d)| (d, s));
    for (s, d) in shell {
        if d == 0 || !in_bulk[s] {
            continue;
        }
        sums[d as usize] += (psi[emitter] - psi[s]).abs();
        counts[d as usize] += 1;
    }
    Ok(ShellSums { emitter, sums, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearFieldCurve {
    /// `δψ(r)/δψ(1)`.
    pub profile: Profile,
    /// Unnormalized pair averages aligned with `profile.r`.
    pub raw: Vec<f64>,
    pub pairs: Vec<usize>,
    /// Distances with no admissible pair.
    pub dropped: Vec<usize>,
    pub emitters: usize,
}

/// Averages shell sums uniformly over all emitter-site pairs at each
/// distance. Emitters are merged in site order, so the result does not
/// depend on the order of `shells`.
pub fn combine_shells(shells: &[ShellSums], r_max: u32) -> Result<NearFieldCurve> {
    if shells.is_empty() {
        return Err(Error::EmptyBulk(0));
    }
    let mut ordered: Vec<&ShellSums> = shells.iter().collect();
    ordered.sort_by_key(|s| s.emitter);
    let n = r_max as usize + 1;
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for s in ordered {
        for r in 1..n.min(s.sums.len()) {
            sums[r] += s.sums[r];
            counts[r] += s.counts[r];
        }
    }
    let mut r_kept = Vec::new();
    let mut raw = Vec::new();
    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    for r in 1..n {
        if counts[r] == 0 {
            dropped.push(r);
            continue;
        }
        r_kept.push(r);
        raw.push(sums[r] / counts[r] as f64);
        pairs.push(counts[r]);
    }
    if !dropped.is_empty() {
        warn!("near-field curve: no bulk pairs at distances {dropped:?}");
    }
    let norm = match r_kept.first() {
        Some(1) if raw[0] > 0.0 => raw[0],
        _ => return Err(Error::Degenerate("near-field curve has no positive value at r = 1".into())),
    };
    let amp = raw.iter().map(|v| v / norm).collect();
    Ok(NearFieldCurve {
        profile: Profile::new(r_kept, amp, ProfileKind::BulkShellAverage)?,
        raw,
        pairs,
        dropped,
        emitters: shells.len(),
    })
}

/// Near-field curve from bound states `(emitter site, ψ)` on `graph`, with
/// emitters and evaluation sites restricted to the bulk.
pub fn near_field_curve(graph: &Graph, states: &[(usize, &[f64])], r_bulk: u32, r_max: u32) -> Result<NearFieldCurve> {
    let bulk = bulk_sites(graph, r_bulk);
    if bulk.is_empty() {
        return Err(Error::EmptyBulk(r_bulk as usize));
    }
    let mut in_bulk = vec![false; graph.n_sites()];
    bulk.iter().for_each(|&s| in_bulk[s] = true);
    let shells =
        states.iter().map(|&(e, psi)| shell_differences(graph, &in_bulk, e, psi, r_max)).collect::<Result<Vec<_>>>()?;
    combine_shells(&shells, r_max)
}

/// `r_max^{d_w} Δ`; the near-field regime needs this well below 1.
pub fn near_field_parameter(r_max: u32, d_w: f64, delta: f64) -> f64 {
    (r_max as f64).powf(d_w) * delta
}

/// Deterministic stratified subsample: `cap` evenly spaced entries of the
/// sorted site list.
pub fn stratified_subsample(sites: &[usize], cap: usize) -> Vec<usize> {
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    if sorted.len() <= cap {
        return sorted;
    }
    (0..cap).map(|k| sorted[k * sorted.len() / cap]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddlePoint {
    pub tau_star: f64,
    pub s_star: f64,
    pub xi_c: f64,
}

/// `S(τ) = Δτ + C (d^{d_w}/τ)^{1/(d_w−1)}`
pub fn action(tau: f64, delta: f64, d: f64, c: f64, d_w: f64) -> f64 {
    delta * tau + c * (d.powf(d_w) / tau).powf(1.0 / (d_w - 1.0))
}

/// Minimum of [`action`] and the associated localization length
/// `ξ_C = [(1/d_w)(C/(d_w−1))^{(d_w−1)/d_w}]^{−1} Δ^{−1/d_w}`.
pub fn saddle_point(delta: f64, d: f64, c: f64, d_w: f64) -> Result<SaddlePoint> {
    if !(delta > 0.0 && d > 0.0 && c > 0.0 && d_w > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "saddle point needs Δ, d, C > 0 and d_w > 1 (got Δ={delta}, d={d}, C={c}, d_w={d_w})"
        )));
    }
    let a = (c / (d_w - 1.0)).powf((d_w - 1.0) / d_w);
    Ok(SaddlePoint {
        tau_star: a * d * delta.powf(-(d_w - 1.0) / d_w),
        s_star: d_w * a * d * delta.powf(1.0 / d_w),
        xi_c: d_w / a * delta.powf(-1.0 / d_w),
    })
}
