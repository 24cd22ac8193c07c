//! Reference computations for tests. Everything here is written against plain
//! vectors and explicit loops so it shares no code path with `bellkit`.

pub mod dense;
pub mod polytope;
