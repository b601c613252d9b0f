//! Criterion benchmarks for the spectral, evolution and renormalization kernels; see `benches/kernels.rs`.
