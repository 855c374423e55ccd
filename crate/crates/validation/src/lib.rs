//! Acceptance checks for the simulator. The checks live in `tests/acceptance.rs`
//! and run with `cargo test -p mithril-validation --test acceptance`.
