//! Benchmark-only crate; see `benches/radius.rs`.
