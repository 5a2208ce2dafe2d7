//! Criterion benchmarks for `erkn-core`; see `benches/`.
