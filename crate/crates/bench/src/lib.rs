//! Criterion benchmarks for `ising-core`; see `benches/`.
