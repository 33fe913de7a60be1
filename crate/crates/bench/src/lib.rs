//! Benchmarks live in `benches/`; run them with `cargo bench -p delayed-hedge-bench`.
