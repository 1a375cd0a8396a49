//! Benchmark-only crate; see `benches/kernel.rs`.
//!
//! The crate intentionally exports nothing: it exists to host the criterion
//! targets without adding bench-only dependencies to the library crates.
