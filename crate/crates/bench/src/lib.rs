//! Criterion benchmark harness crate; see benches/.
