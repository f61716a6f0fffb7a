//! Test-only package. The checks are in `tests/acceptance.rs`; run them with
//! `cargo test -p coqe-validation --test acceptance`.
