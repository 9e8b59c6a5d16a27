//! Criterion benchmarks for `gpscale`. Run with `cargo bench -p gpscale-bench`.
