//! Criterion benchmarks for the iris segmentation pipeline; see `benches/`.
