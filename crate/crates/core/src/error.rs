use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice parameters: {0}")]
    InvalidParams(String),

    #[error("lattice would have {requested} sites, above the cap of {cap}")]
    SizeCap { requested: u64, cap: usize },

    #[error("site {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("site {0} is not on a tagged boundary path")]
    NotOnBoundary(usize),

    #[error("no tabulated dimensions for {0}")]
    NoTableEntry(String),

    #[error("{method} did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NotConverged { method: &'static str, iterations: usize, residual: f64 },

    #[error("shift {shift} is not below the spectrum (curvature {curvature:.3e} along a search direction)")]
    ShiftInSpectrum { shift: f64, curvature: f64 },

    #[error("dimension {dim} exceeds the dense oracle cap {cap}")]
    DenseCap { dim: usize, cap: usize },

    #[error("no in-gap bound state: measured detuning {delta:.3e} is not positive")]
    NoBoundState { delta: f64 },

    #[error("emitter must sit at the path anchor {anchor}, found {site}")]
    EmitterNotAtAnchor { site: usize, anchor: usize },

    #[error("profile does not decay in window [{lo}, {hi}] (linear coefficient {slope:.3e})")]
    NonDecaying { lo: usize, hi: usize, slope: f64 },

    #[error("too few points: {got} (need at least {need})")]
    TooFewPoints { got: usize, need: usize },

    #[error("non-positive value {value:e} at r = {r}")]
    NonPositive { r: usize, value: f64 },

    #[error("degenerate fit range: {0}")]
    Degenerate(String),

    #[error("empty bulk: no site deeper than r_bulk = {0}")]
    EmptyBulk(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
