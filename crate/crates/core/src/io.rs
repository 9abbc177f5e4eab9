//! Text exports: graphs, operators, profiles and fit reports.
//!
//! Floats are written in shortest round-trip form, so equal inputs give
//! byte-identical files.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::boundstate::Profile;
use crate::error::{Error, Result};
use crate::experiment::{FarFieldReport, NearFieldReport};
use crate::graphs::Graph;
use crate::operators::SparseOperator;

/// Shortest round-trip decimal, exponent form for small and large values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else {
        v.to_string()
    }
}

/// `# family generation n_sites` header, then `i j` per edge with `i < j`.
pub fn write_edge_list(graph: &Graph, mut w: impl Write) -> Result<()> {
    let spec = graph.spec();
    writeln!(w, "# {} {} {}", spec.family_name(), spec.generation(), graph.n_sites())?;
    for (i, j) in graph.edges() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

/// `i x y [z]` per site.
pub fn write_coords(graph: &Graph, mut w: impl Write) -> Result<()> {
    for i in 0..graph.n_sites() {
        write!(w, "{i}")?;
        for c in graph.coords(i) {
            write!(w, " {c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parsed edge-list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub family: String,
    pub generation: u32,
    pub n_sites: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn read_edge_list(r: impl BufRead) -> Result<EdgeList> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty edge list".into()))??;
    let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    let bad = || Error::InvalidArgument(format!("malformed edge-list header {header:?}"));
    if !header.starts_with('#') || fields.len() != 3 {
        return Err(bad());
    }
    let generation = fields[1].parse().map_err(|_| bad())?;
    let n_sites = fields[2].parse().map_err(|_| bad())?;
    let mut edges = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
            _ => return Err(Error::InvalidArgument(format!("malformed edge line {line:?}"))),
        }
    }
    Ok(EdgeList { family: fields[0].to_string(), generation, n_sites, edges })
}

/// `dim` header, then `i j value` for the upper triangle.
pub fn write_matrix(op: &SparseOperator, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", op.dim())?;
    for (i, j, v) in op.upper_triplets() {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}

pub fn read_matrix(r: impl BufRead, hopping: f64) -> Result<SparseOperator> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty matrix file".into()))??;
    let dim = header.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad dimension {header:?}")))?;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let parsed =
            (f.len() == 3).then(|| Some((f[0].parse().ok()?, f[1].parse().ok()?, f[2].parse().ok()?))).flatten();
        triplets.push(parsed.ok_or_else(|| Error::InvalidArgument(format!("malformed triplet {line:?}")))?);
    }
    SparseOperator::from_upper_triplets(dim, hopping, &triplets)
}

/// Row provenance for profile CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMeta<'a> {
    pub family: &'a str,
    pub generation: u32,
    pub delta_measured: f64,
    pub coupling: f64,
    pub route: &'a str,
    pub tol_eig: f64,
    pub tol_lin: f64,
}

pub const PROFILE_HEADER: &str = "r,amp,family,generation,delta_measured,coupling_g,route,tol_eig,tol_lin";

/// Writes the header when `header` is set, then one row per profile point.
pub fn write_profile_csv(profile: &Profile, meta: &ProfileMeta, header: bool, mut w: impl Write) -> Result<()> {
    if header {
        writeln!(w, "{PROFILE_HEADER}")?;
    }
    for (r, a) in profile.r.iter().zip(&profile.amp) {
        writeln!(
            w,
            "{r},{},{},{},{},{},{},{},{}",
            num(*a),
            meta.family,
            meta.generation,
            num(meta.delta_measured),
            num(meta.coupling),
            meta.route,
            num(meta.tol_eig),
            num(meta.tol_lin)
        )?;
    }
    Ok(())
}

/// Summary document shared by far- and near-field runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub family: String,
    pub generation: u32,
    pub n_sites: usize,
    pub deltas: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_rescaled: Vec<f64>,
    pub d_w_fit: Option<f64>,
    pub stderr: Option<f64>,
    pub d_w_theory: Option<f64>,
    pub plateau_windows: Vec<[usize; 3]>,
    pub beta_fit: Option<f64>,
    pub beta_stderr: Option<f64>,
    pub beta_theory: Option<f64>,
    pub beta_deviates: Option<bool>,
    pub curve: Vec<(usize, f64)>,
    pub failures: Vec<(f64, String)>,
    pub tol_eig: f64,
    pub tol_lin: f64,
}

impl FitReport {
    pub fn from_farfield(rep: &FarFieldReport) -> Self {
        FitReport {
            family: rep.provenance.family.clone(),
            generation: rep.provenance.generation,
            n_sites: rep.provenance.n_sites,
            deltas: rep.points.iter().map(|p| p.delta_measured).collect(),
            xi: rep.points.iter().map(|p| p.xi).collect(),
            xi_rescaled: rep.points.iter().map(|p| p.xi_rescaled).collect(),
            d_w_fit: rep.d_w_fit,
            stderr: rep.d_w_stderr,
            d_w_theory: rep.d_w_theory,
            plateau_windows: rep.points.iter().map(|p| p.sweep.plateau).collect(),
            beta_fit: None,
            beta_stderr: None,
            beta_theory: None,
            beta_deviates: None,
            curve: Vec::new(),
            failures: rep.failures.iter().map(|f| (f.delta, f.error.clone())).collect(),
            tol_eig: rep.provenance.tol_eig,
            tol_lin: rep.provenance.tol_lin,
        }
    }

    pub fn from_nearfield(rep: &NearFieldReport) -> Self {
        let p = &rep.curve.profile;
        FitReport {
            family: rep.provenance.family.clone(),
            generation: rep.provenance.generation,
            n_sites: rep.provenance.n_sites,
            deltas: vec![rep.delta_target],
            xi: Vec::new(),
            xi_rescaled: Vec::new(),
            d_w_fit: None,
            stderr: None,
            d_w_theory: None,
            plateau_windows: Vec::new(),
            beta_fit: Some(rep.beta_fit),
            beta_stderr: Some(rep.beta_stderr),
            beta_theory: rep.beta_theory,
            beta_deviates: rep.deviates,
            curve: p.r.iter().copied().zip(p.amp.iter().copied()).collect(),
            failures: Vec::new(),
            tol_eig: rep.provenance.tol_eig,
            tol_lin: rep.provenance.tol_lin,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

pub const FARFIELD_HEADER: &str = "family,generation,n_sites,delta_target,delta_measured,coupling_g,xi,xi_rescaled,\
plateau_r_min,plateau_r_max_first,plateau_r_max_last,route,tol_eig,tol_lin";

pub fn write_farfield_csv(rep: &FarFieldReport, header: bool, mut w: impl Write) -> Result<()> {
    if header {
        writeln!(w, "{FARFIELD_HEADER}")?;
    }
    let pr = &rep.provenance;
    for p in &rep.points {
        let [a, b, c] = p.sweep.plateau;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{a},{b},{c},{},{},{}",
            pr.family,
            pr.generation,
            pr.n_sites,
            num(p.delta_target),
            num(p.delta_measured),
            num(p.coupling),
            num(p.xi),
            num(p.xi_rescaled),
            rep.route,
            num(pr.tol_eig),
            num(pr.tol_lin)
        )?;
    }
    Ok(())
}

pub const NEARFIELD_HEADER: &str =
    "family,generation,n_sites,r,delta_psi_normalized,delta_psi,pairs,delta_measured_min,delta_measured_max,\
coupling_g,r_bulk,beta_fit,beta_stderr,beta_theory,tol_eig,tol_lin";

pub fn write_nearfield_csv(rep: &NearFieldReport, header: bool, mut w: impl Write) -> Result<()> {
    if header {
        writeln!(w, "{NEARFIELD_HEADER}")?;
    }
    let pr = &rep.provenance;
    let c = &rep.curve;
    let theory = rep.beta_theory.map(num).unwrap_or_default();
    for k in 0..c.profile.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{theory},{},{}",
            pr.family,
            pr.generation,
            pr.n_sites,
            c.profile.r[k],
            num(c.profile.amp[k]),
            num(c.raw[k]),
            c.pairs[k],
            num(rep.delta_measured[0]),
            num(rep.delta_measured[1]),
            num(rep.coupling),
            rep.r_bulk,
            num(rep.beta_fit),
            num(rep.beta_stderr),
            num(pr.tol_eig),
            num(pr.tol_lin)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundstate::ProfileKind;
    use crate::graphs::{build_graph, FamilySpec};
    use crate::operators::bath_operator;

    #[test]
    fn edge_list_round_trip() {
        let g = build_graph(&FamilySpec::GasketB2 { generation: 3 }).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# gasket-b2 3 42\n"));
        let parsed = read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(parsed.n_sites, 42);
        assert_eq!(parsed.edges, g.edges().collect::<Vec<_>>());
        assert!(parsed.edges.iter().all(|(i, j)| i < j));
    }

    #[test]
    fn chain_of_four_has_three_edges() {
        let g = build_graph(&FamilySpec::Chain { length: 4 }).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# chain 0 4\n0 1\n1 2\n2 3\n");
        let mut coords = Vec::new();
        write_coords(&g, &mut coords).unwrap();
        assert_eq!(String::from_utf8(coords).unwrap().lines().nth(2), Some("2 2"));
    }

    #[test]
    fn pyramid_coords_have_three_columns() {
        let g = build_graph(&FamilySpec::PyramidB2 { generation: 1 }).unwrap();
        let mut buf = Vec::new();
        write_coords(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().all(|l| l.split(' ').count() == 4));
    }

    #[test]
    fn matrix_round_trip() {
        let g = build_graph(&FamilySpec::Vicsek { generation: 2 }).unwrap();
        let op = bath_operator(&g, 0.7, true);
        let mut buf = Vec::new();
        write_matrix(&op, &mut buf).unwrap();
        let back = read_matrix(buf.as_slice(), 0.7).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_edge_list("0 1\n".as_bytes()).is_err());
        assert!(read_edge_list("# chain 0 3\n0 x\n".as_bytes()).is_err());
        assert!(read_matrix("2\n0 1\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn profile_rows_carry_provenance() {
        let p = Profile::new(vec![0, 1], vec![1.0, 0.5], ProfileKind::BoundaryPointwise).unwrap();
        let meta = ProfileMeta {
            family: "chain",
            generation: 0,
            delta_measured: 0.01,
            coupling: 1e-3,
            route: "secular",
            tol_eig: 1e-10,
            tol_lin: 1e-13,
        };
        let mut buf = Vec::new();
        write_profile_csv(&p, &meta, true, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], PROFILE_HEADER);
        assert_eq!(lines[2], "1,0.5,chain,0,0.01,0.001,secular,1e-10,1e-13");
    }
}
