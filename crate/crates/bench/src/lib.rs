//! Criterion benchmarks for the generation and evolution pipeline; see
//! `benches/pipeline.rs`.
