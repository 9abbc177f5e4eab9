//! Criterion benchmarks for the `fractal-qed` solvers; see `benches/`.
