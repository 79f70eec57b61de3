//! Criterion benchmarks for `teleop-core`; see `benches/`.
