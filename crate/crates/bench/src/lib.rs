//! Criterion benchmarks for the `aisbound` engines live under `benches/`.
