//! Benchmark-only crate; see `benches/dald.rs`.
