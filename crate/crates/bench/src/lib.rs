//! Criterion benchmarks live in `benches/`; this crate only hosts them.
