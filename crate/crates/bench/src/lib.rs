//! Criterion benchmarks for `lnprod`; see `benches/`.
