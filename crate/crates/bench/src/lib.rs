//! Benchmarks for castguard live under `benches/`.
