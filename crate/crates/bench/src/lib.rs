//! Criterion benchmarks for the simulator core; see `benches/core.rs`.
