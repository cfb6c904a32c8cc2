//! Criterion benchmarks for `nonsimplify-core`; run with `cargo bench -p nonsimplify-bench`.
