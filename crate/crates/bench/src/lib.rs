//! Criterion benchmarks for the solver and the certifier live in `benches/`.
