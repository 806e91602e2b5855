//! Criterion benchmarks for the online learners; see `benches/`.
