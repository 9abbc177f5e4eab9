//! `fractal-qed`: generate lattices, run far- and near-field sweeps, verify
//! the solvers against oracles and regenerate the figure data sets.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use fractal_qed::config::{OutputFormat, SolverConfig};
use fractal_qed::experiment::{
    farfield_on, figure2_families, figure4_families, nearfield_on, run_verify, synthetic_farfield, FarFieldReport,
    Fault, NearFieldReport, Scale, SyntheticModel,
};
use fractal_qed::io::{self, num, FitReport, ProfileMeta};
use fractal_qed::{build_graph, ExperimentConfig, FamilySpec};

#[derive(Parser)]
#[command(name = "fractal-qed", version, about = "Atom-photon bound states on fractal photonic lattices")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides `output.directory` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the lattice and write its edge list and coordinates.
    Generate(ConfigArg),
    /// Localization length per detuning and the walk-dimension fit.
    Farfield(FarfieldArgs),
    /// Emitter-averaged near-field curve and its exponent.
    Nearfield(ConfigArg),
    /// Oracle checks on small graphs; exits nonzero on any failure.
    Verify(VerifyArgs),
    /// Far-field runs over the families of the localization-length figure.
    #[command(name = "reproduce-fig2")]
    ReproduceFig2(ReproduceArgs),
    /// Near-field runs over the families of the near-field figure.
    #[command(name = "reproduce-fig4")]
    ReproduceFig4(ReproduceArgs),
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct FarfieldArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replace the lattice by exact profiles `r^{-(d-1)/2} e^{-r/ξ}` with
    /// `ξ = A·Δ^{-1/d_w}`, given as `A,d,d_w`.
    #[arg(long, value_name = "A,d,d_w")]
    synthetic: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only the `[solver]` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    CorruptOperator,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Base settings; its lattice is replaced by each family in turn.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate(a) => generate(&load(&a.config)?, out),
        Command::Farfield(a) => farfield(&load(&a.config)?, a.synthetic.as_deref(), out),
        Command::Nearfield(a) => nearfield(&load(&a.config)?, out),
        Command::Verify(a) => verify(a, out),
        Command::ReproduceFig2(a) => reproduce(a, out, Figure::Two),
        Command::ReproduceFig4(a) => reproduce(a, out, Figure::Four),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn out_dir(cfg_dir: &Path, flag: Option<&Path>) -> Result<PathBuf> {
    let dir = flag.unwrap_or(cfg_dir).to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn stem(spec: &FamilySpec) -> String {
    match *spec {
        FamilySpec::Chain { length } => format!("chain-L{length}"),
        FamilySpec::Square { side } => format!("square-L{side}"),
        _ => format!("{}-g{}", spec.family_name(), spec.generation()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> fractal_qed::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

fn generate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<bool> {
    let dir = out_dir(&cfg.output.directory, out)?;
    let graph = build_graph(&cfg.lattice)?;
    let s = stem(&cfg.lattice);
    write_file(&dir.join(format!("{s}.edges")), |w| io::write_edge_list(&graph, w))?;
    write_file(&dir.join(format!("{s}.coords")), |w| io::write_coords(&graph, w))?;
    println!("{}: {} sites, {} edges", cfg.lattice, graph.n_sites(), graph.n_edges());
    Ok(true)
}

fn write_farfield(rep: &FarFieldReport, cfg: &ExperimentConfig, dir: &Path, s: &str) -> Result<()> {
    if cfg.output.formats.contains(&OutputFormat::Csv) {
        write_file(&dir.join(format!("{s}-farfield.csv")), |w| io::write_farfield_csv(rep, true, w))?;
        write_file(&dir.join(format!("{s}-profiles.csv")), |w| {
            for (k, p) in rep.points.iter().enumerate() {
                let meta = ProfileMeta {
                    family: &rep.provenance.family,
                    generation: rep.provenance.generation,
                    delta_measured: p.delta_measured,
                    coupling: p.coupling,
                    route: rep.route,
                    tol_eig: rep.provenance.tol_eig,
                    tol_lin: rep.provenance.tol_lin,
                };
                io::write_profile_csv(&p.profile, &meta, k == 0, &mut *w)?;
            }
            Ok(())
        })?;
    }
    if cfg.output.formats.contains(&OutputFormat::Json) {
        write_file(&dir.join(format!("{s}-farfield.json")), |w| io::write_json(&FitReport::from_farfield(rep), w))?;
    }
    Ok(())
}

fn write_nearfield(rep: &NearFieldReport, cfg: &ExperimentConfig, dir: &Path, s: &str) -> Result<()> {
    if cfg.output.formats.contains(&OutputFormat::Csv) {
        write_file(&dir.join(format!("{s}-nearfield.csv")), |w| io::write_nearfield_csv(rep, true, w))?;
    }
    if cfg.output.formats.contains(&OutputFormat::Json) {
        write_file(&dir.join(format!("{s}-nearfield.json")), |w| io::write_json(&FitReport::from_nearfield(rep), w))?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn parse_synthetic(text: &str) -> Result<SyntheticModel> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("--synthetic expects A,d,d_w, got {text:?}"))?;
    match v[..] {
        [prefactor, d, d_w] => Ok(SyntheticModel { prefactor, d, d_w }),
        _ => bail!("--synthetic expects three numbers, got {}", v.len()),
    }
}

fn farfield(cfg: &ExperimentConfig, synthetic: Option<&str>, out: Option<&Path>) -> Result<bool> {
    let dir = out_dir(&cfg.output.directory, out)?;
    let (rep, s) = match synthetic {
        Some(text) => (synthetic_farfield(&parse_synthetic(text)?, cfg)?, "synthetic".to_string()),
        None => (farfield_on(&build_graph(&cfg.lattice)?, cfg)?, stem(&cfg.lattice)),
    };
    write_farfield(&rep, cfg, &dir, &s)?;
    println!(
        "{s}: {} of {} detunings, d_w = {} ± {} (theory {})",
        rep.points.len(),
        rep.points.len() + rep.failures.len(),
        opt(rep.d_w_fit),
        opt(rep.d_w_stderr),
        opt(rep.d_w_theory)
    );
    Ok(true)
}

fn nearfield(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<bool> {
    let dir = out_dir(&cfg.output.directory, out)?;
    let rep = nearfield_on(&build_graph(&cfg.lattice)?, cfg)?;
    let s = stem(&cfg.lattice);
    write_nearfield(&rep, cfg, &dir, &s)?;
    println!(
        "{s}: {} emitters, beta = {:.4} ± {:.4} (benchmark {})",
        rep.emitters.len(),
        rep.beta_fit,
        rep.beta_stderr,
        opt(rep.beta_theory)
    );
    Ok(true)
}

fn verify(a: VerifyArgs, out: Option<&Path>) -> Result<bool> {
    let solver = match &a.config {
        Some(p) => load(p)?.solver,
        None => SolverConfig::default(),
    };
    let fault = a.inject_fault.map(|FaultArg::CorruptOperator| Fault::CorruptOperator);
    let rep = run_verify(&solver, fault);
    for c in &rep.checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        println!("{tag} {}: {:.3e} (tol {:.0e})", c.name, c.value, c.tolerance);
    }
    let failed = rep.checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", rep.checks.len());
    if let Some(dir) = out {
        let dir = out_dir(dir, None)?;
        write_file(&dir.join("verify.json"), |w| io::write_json(&rep, w))?;
    }
    Ok(rep.passed())
}

#[derive(Clone, Copy)]
enum Figure {
    Two,
    Four,
}

fn reproduce(a: ReproduceArgs, out: Option<&Path>, fig: Figure) -> Result<bool> {
    let scale = match a.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let (families, name) = match fig {
        Figure::Two => (figure2_families(scale), "fig2"),
        Figure::Four => (figure4_families(scale), "fig4"),
    };
    let base = match &a.config {
        Some(p) => load(p)?,
        None => ExperimentConfig::new(families[0]),
    };
    let dir = out_dir(&base.output.directory.join(name), out.map(|o| o.join(name)).as_deref())?;

    let mut rows = Vec::new();
    let mut ok = true;
    for spec in families {
        let mut cfg = base.clone();
        cfg.lattice = spec;
        let s = stem(&spec);
        info!("{name}: {spec}");
        let row = build_graph(&spec).map_err(anyhow::Error::from).and_then(|graph| match fig {
            Figure::Two => {
                let rep = farfield_on(&graph, &cfg)?;
                write_farfield(&rep, &cfg, &dir, &s)?;
                Ok(summary_row(
                    &rep.provenance.family,
                    rep.provenance.generation,
                    graph.n_sites(),
                    [rep.d_w_fit, rep.d_w_stderr, rep.d_w_theory],
                ))
            }
            Figure::Four => {
                let rep = nearfield_on(&graph, &cfg)?;
                write_nearfield(&rep, &cfg, &dir, &s)?;
                Ok(summary_row(
                    &rep.provenance.family,
                    rep.provenance.generation,
                    graph.n_sites(),
                    [Some(rep.beta_fit), Some(rep.beta_stderr), rep.beta_theory],
                ))
            }
        });
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                warn!("{spec}: {e:#}");
                ok = false;
            }
        }
    }
    let header = match fig {
        Figure::Two => "family,generation,n_sites,d_w_fit,d_w_stderr,d_w_theory",
        Figure::Four => "family,generation,n_sites,beta_fit,beta_stderr,beta_theory",
    };
    let path = dir.join("summary.csv");
    let mut w = create(&path)?;
    writeln!(w, "{header}")?;
    for r in &rows {
        writeln!(w, "{r}")?;
        println!("{r}");
    }
    w.flush()?;
    Ok(ok)
}

fn summary_row(family: &str, generation: u32, n_sites: usize, values: [Option<f64>; 3]) -> String {
    let v: Vec<String> = values.iter().map(|x| x.map(num).unwrap_or_default()).collect();
    format!("{family},{generation},{n_sites},{}", v.join(","))
}
