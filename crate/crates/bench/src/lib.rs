//! Criterion benchmarks for `dlbound`; see `benches/`.
