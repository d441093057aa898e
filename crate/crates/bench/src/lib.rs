//! Criterion benchmarks for `srt-core`; run with `cargo bench -p srt-bench`.
