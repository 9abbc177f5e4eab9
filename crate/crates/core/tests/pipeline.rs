use fractal_qed::boundstate::sub_gaussian_envelope_check;
use fractal_qed::config::{log_spaced, DeltaGrid, SolverConfig};
use fractal_qed::experiment::{
    bulk_with_radius, farfield_on, nearfield_on, run_verify, synthetic_farfield, Fault, SyntheticModel,
};
use fractal_qed::graphs::{ball, bulk_sites, table_dimensions};
use fractal_qed::io::{write_farfield_csv, write_json, write_nearfield_csv, FitReport};
use fractal_qed::scaling::stratified_subsample;
use fractal_qed::solvers::ExpmOptions;
use fractal_qed::{build_graph, Bath, ExperimentConfig, FamilySpec};

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn verify_suite_passes_and_flags_corruption() {
    let clean = run_verify(&SolverConfig::default(), None);
    let failed: Vec<_> = clean.checks.iter().filter(|c| !c.passed).map(|c| &c.name).collect();
    assert!(clean.passed(), "{failed:?}");

    let corrupt = run_verify(&SolverConfig::default(), Some(Fault::CorruptOperator));
    assert!(!corrupt.passed());
    // A shifted diagonal entry breaks the zero-row-sum property everywhere.
    assert!(corrupt.checks.iter().filter(|c| c.name.contains("constant kernel")).all(|c| !c.passed));
}

#[test]
fn gasket_return_amplitude_decays_with_spectral_dimension() {
    let graph = build_graph(&FamilySpec::GasketB2 { generation: 5 }).unwrap();
    let bath = Bath::laplacian(&graph, 1.0);
    let dims = table_dimensions(graph.spec()).unwrap();
    let source = bulk_sites(&graph, 4)[0];
    let taus = log_spaced(1.0, 10.0, 9);
    let sites: Vec<usize> = (0..graph.n_sites()).collect();
    let rep =
        sub_gaussian_envelope_check(&graph, &bath, &dims, source, &sites, &taus, &ExpmOptions::default()).unwrap();
    // K(0, τ) ∼ τ^{−d_s/2}.
    let expected = -dims.d_s / 2.0;
    assert!((rep.return_slope_expected - expected).abs() < 1e-12);
    let slope = rep.return_slope.unwrap();
    assert!((slope - expected).abs() < 0.1, "slope {slope} vs {expected}");
    assert_eq!(rep.violations, 0);
}

fn farfield_bytes(cfg: &ExperimentConfig) -> (Vec<u8>, Vec<u8>) {
    let graph = build_graph(&cfg.lattice).unwrap();
    let rep = farfield_on(&graph, cfg).unwrap();
    let (mut csv, mut json) = (Vec::new(), Vec::new());
    write_farfield_csv(&rep, true, &mut csv).unwrap();
    write_json(&FitReport::from_farfield(&rep), &mut json).unwrap();
    (csv, json)
}

#[test]
fn farfield_is_byte_identical_across_pool_sizes() {
    let mut cfg = ExperimentConfig::new(FamilySpec::GasketB2 { generation: 5 });
    cfg.physics.delta_grid = DeltaGrid::LogSpaced { min: 1e-2, max: 1e-1, count: 5 };
    let one = pool(1).install(|| farfield_bytes(&cfg));
    let three = pool(3).install(|| farfield_bytes(&cfg));
    assert!(one == three);
    assert!(!one.0.is_empty());
}

#[test]
fn nearfield_is_byte_identical_across_pool_sizes() {
    let mut cfg = ExperimentConfig::new(FamilySpec::Vicsek { generation: 3 });
    cfg.nearfield.emitter_cap = 12;
    cfg.nearfield.min_bulk_sites = 10;
    let run = || {
        let graph = build_graph(&cfg.lattice).unwrap();
        let rep = nearfield_on(&graph, &cfg).unwrap();
        let (mut csv, mut json) = (Vec::new(), Vec::new());
        write_nearfield_csv(&rep, true, &mut csv).unwrap();
        write_json(&FitReport::from_nearfield(&rep), &mut json).unwrap();
        (csv, json)
    };
    assert!(pool(1).install(run) == pool(4).install(run));
}

#[test]
fn farfield_failures_are_recorded_and_run_continues() {
    let mut cfg = ExperimentConfig::new(FamilySpec::Chain { length: 400 });
    // At Δ = 1e-5 the bound state spans the whole chain; no clean window.
    cfg.physics.delta_grid = DeltaGrid::List(vec![1e-5, 1e-2, 3e-2, 1e-1, 3e-1]);
    let rep = farfield_on(&build_graph(&cfg.lattice).unwrap(), &cfg).unwrap();
    assert_eq!(rep.points.len() + rep.failures.len(), 5);
    assert!(rep.points.len() >= 4);
    for p in &rep.points {
        let exact = 1.0 / (1.0 + p.delta_measured / 2.0).acosh();
        assert!((p.xi - exact).abs() / exact < 0.02);
    }
}

#[test]
fn synthetic_farfield_recovers_model() {
    let cfg = ExperimentConfig::new(FamilySpec::Chain { length: 4 });
    for &(a, d, d_w) in &[(1.0, 1.0, 2.0), (2.0, 1.36, 2.32), (0.7, 1.8, 2.46)] {
        let model = SyntheticModel { prefactor: a, d, d_w };
        let rep = synthetic_farfield(&model, &cfg).unwrap();
        assert!((rep.d_w_fit.unwrap() - d_w).abs() < 1e-6);
        for p in &rep.points {
            assert!((p.xi - model.xi(p.delta_measured)).abs() / p.xi < 1e-6);
        }
    }
    assert!(synthetic_farfield(&SyntheticModel { prefactor: 1.0, d: 1.0, d_w: 1.0 }, &cfg).is_err());
}

#[test]
fn config_file_roundtrip_drives_the_same_run() {
    let mut cfg = ExperimentConfig::new(FamilySpec::Chain { length: 300 });
    cfg.physics.delta_grid = DeltaGrid::List(vec![0.02, 0.05, 0.1, 0.2]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let loaded = ExperimentConfig::load(&path).unwrap();
    assert_eq!(loaded, cfg);
    assert!(farfield_bytes(&loaded) == farfield_bytes(&cfg));
}

fn covered_distances(graph: &fractal_qed::Graph, bulk: &[usize]) -> Vec<bool> {
    let mut in_bulk = vec![false; graph.n_sites()];
    bulk.iter().for_each(|&s| in_bulk[s] = true);
    let mut seen = vec![false; 11];
    for e in stratified_subsample(bulk, 200) {
        for (s, d) in ball(graph, e, 10) {
            seen[d as usize] |= in_bulk[s];
        }
    }
    seen
}

#[test]
fn bulk_radius_keeps_pairs_across_the_fit_window() {
    let graph = build_graph(&FamilySpec::PyramidB2 { generation: 6 }).unwrap();
    let (r, bulk) = bulk_with_radius(&graph, 8, 100, 10, 200).unwrap();
    assert!(bulk.len() >= 100);
    assert!(covered_distances(&graph, &bulk)[1..].iter().all(|&x| x), "radius {r}");
    // Any deeper bulk is either too small or breaks into islands narrower
    // than the window.
    for deeper in r + 1..=8 {
        let b = bulk_sites(&graph, deeper);
        assert!(b.len() < 100 || !covered_distances(&graph, &b)[1..].iter().all(|&x| x), "radius {deeper}");
    }
}
