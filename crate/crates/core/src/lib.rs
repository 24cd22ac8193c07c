//! Three-qubit Bell-test analysis.
//!
//! - [`quantum`]: dense GHZ/white-noise states and spin correlations.
//! - [`bell`]: Bell expressions, correlation tables and their bounds.
//! - [`lhv`]: instruction-set models and least-squares fits to data.
//! - [`experiment`]: seeded finite-statistics simulation, estimation and
//!   the quantum-versus-local model comparison.
//! - [`formats`]: dataset JSON and correlation-table CSV interchange.

pub mod bell;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod formats;
pub mod lhv;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
