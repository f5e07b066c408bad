//! Acceptance tests only; see `tests/acceptance.rs`.
