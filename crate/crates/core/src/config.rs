//! Experiment configuration read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundstate::BoundStateOptions;
use crate::error::{Error, Result};
use crate::graphs::{FamilySpec, DEFAULT_SITE_CAP};
use crate::scaling::SweepOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: FamilySpec,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub farfield: FarFieldConfig,
    #[serde(default)]
    pub nearfield: NearFieldConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    /// Hopping `J`; energies are reported in these units.
    pub hopping: f64,
    pub laplacianize: bool,
    pub delta_grid: DeltaGrid,
    pub coupling: CouplingRule,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            hopping: 1.0,
            laplacianize: true,
            delta_grid: DeltaGrid::LogSpaced { min: 1e-3, max: 1e-1, count: 10 },
            coupling: CouplingRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaGrid {
    List(Vec<f64>),
    LogSpaced { min: f64, max: f64, count: usize },
}

impl DeltaGrid {
    /// Detunings in units of `J`, ascending.
    pub fn values(&self) -> Vec<f64> {
        let mut v = match self {
            DeltaGrid::List(v) => v.clone(),
            DeltaGrid::LogSpaced { min, max, count } => log_spaced(*min, *max, *count),
        };
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn log_spaced(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            let mut v: Vec<f64> = (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect();
            v[0] = min;
            v[count - 1] = max;
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CouplingRule {
    Fixed {
        fixed: f64,
    },
    /// `g = min(ratio·Δ, cap·J)`.
    Ratio {
        ratio: f64,
        cap: f64,
    },
}

impl Default for CouplingRule {
    fn default() -> Self {
        CouplingRule::Ratio { ratio: 0.1, cap: 1e-3 }
    }
}

impl CouplingRule {
    pub fn coupling(&self, delta: f64, hopping: f64) -> f64 {
        match *self {
            CouplingRule::Fixed { fixed } => fixed,
            CouplingRule::Ratio { ratio, cap } => (ratio * delta).min(cap * hopping),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarFieldConfig {
    /// Which corner of the outer boundary hosts the emitter.
    pub anchor: usize,
    pub r_min: usize,
    pub step: usize,
    pub variance_width: usize,
    pub floor_ratio: f64,
}

impl Default for FarFieldConfig {
    fn default() -> Self {
        let s = SweepOptions::default();
        FarFieldConfig { anchor: 0, r_min: s.r_min, step: s.step, variance_width: s.width, floor_ratio: s.floor_ratio }
    }
}

impl FarFieldConfig {
    pub fn sweep(&self) -> SweepOptions {
        SweepOptions { r_min: self.r_min, step: self.step, width: self.variance_width, floor_ratio: self.floor_ratio }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NearFieldConfig {
    /// Largest bulk radius tried.
    pub r_bulk: u32,
    /// The radius shrinks until at least this many bulk sites remain and
    /// emitters see bulk pairs at every distance of `r_window`.
    pub min_bulk_sites: usize,
    pub r_window: [usize; 2],
    pub delta: f64,
    pub emitter_cap: usize,
}

impl Default for NearFieldConfig {
    fn default() -> Self {
        NearFieldConfig { r_bulk: 8, min_bulk_sites: 100, r_window: [1, 10], delta: 1e-3, emitter_cap: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_eig: f64,
    pub tol_lin: f64,
    pub krylov_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_eig: 1e-10, tol_lin: 1e-13, krylov_cap: 64 }
    }
}

impl SolverConfig {
    pub fn bound_state(&self) -> BoundStateOptions {
        BoundStateOptions { tol_eig: self.tol_eig, tol_lin: self.tol_lin, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("out"), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

impl ExperimentConfig {
    pub fn new(lattice: FamilySpec) -> Self {
        ExperimentConfig {
            lattice,
            physics: PhysicsConfig::default(),
            farfield: FarFieldConfig::default(),
            nearfield: NearFieldConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        let sites = self.lattice.predicted_sites();
        if sites > DEFAULT_SITE_CAP as u64 {
            return Err(Error::Config(format!("{} has {sites} sites, above the cap {DEFAULT_SITE_CAP}", self.lattice)));
        }
        let p = &self.physics;
        if !(p.hopping > 0.0) {
            return Err(Error::Config(format!("hopping must be positive, got {}", p.hopping)));
        }
        let deltas = p.delta_grid.values();
        if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("delta_grid must be non-empty and strictly positive".into()));
        }
        if let DeltaGrid::LogSpaced { min, max, .. } = p.delta_grid {
            if !(max >= min) {
                return Err(Error::Config(format!("delta_grid max {max} is below min {min}")));
            }
        }
        match p.coupling {
            CouplingRule::Fixed { fixed } if !(fixed > 0.0) => {
                return Err(Error::Config("fixed coupling must be positive".into()))
            }
            CouplingRule::Ratio { ratio, cap } if !(ratio > 0.0 && cap > 0.0) => {
                return Err(Error::Config("coupling ratio and cap must be positive".into()))
            }
            _ => {}
        }
        let f = &self.farfield;
        if f.r_min == 0 || f.step == 0 || f.variance_width < 2 {
            return Err(Error::Config("farfield needs r_min ≥ 1, step ≥ 1, variance_width ≥ 2".into()));
        }
        let n = &self.nearfield;
        if n.r_window[0] == 0 || n.r_window[1] <= n.r_window[0] + 1 {
            return Err(Error::Config(format!("nearfield r_window {:?} must be [lo ≥ 1, hi ≥ lo + 2]", n.r_window)));
        }
        if !(n.delta > 0.0) || n.emitter_cap == 0 {
            return Err(Error::Config("nearfield delta and emitter_cap must be positive".into()));
        }
        let s = &self.solver;
        if !(s.tol_eig > 0.0 && s.tol_lin > 0.0) || s.krylov_cap < 2 {
            return Err(Error::Config("solver tolerances must be positive and krylov_cap ≥ 2".into()));
        }
        Ok(())
    }
}
