//! Criterion benchmarks for the jpcp back-end live under `benches/`.
