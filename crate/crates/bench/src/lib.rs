//! Criterion benchmarks for the `rqr3d` kernels live in `benches/`.
