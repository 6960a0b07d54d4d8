//! Benchmark-only crate; see the `estimators` bench target.
