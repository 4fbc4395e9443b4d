//! Criterion benchmarks for the nhcouple steppers and analysis routines live
//! in `benches/`; run them with `cargo bench -p nhcouple-bench`.
