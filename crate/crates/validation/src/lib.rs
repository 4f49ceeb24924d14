//! End-to-end acceptance checks. The checks live in `tests/acceptance.rs`;
//! run them with `cargo test -p lsoc-validation -- --nocapture`.
