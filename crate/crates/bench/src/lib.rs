//! Benchmarks for the hot paths of `knudsen`; see `benches/`.
