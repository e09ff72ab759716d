//! Adapted Wasserstein distances between discrete-time process laws on
//! finite scenario trees, with hedging and utility solvers whose stability
//! under model perturbation can be checked numerically.

pub mod bicausal;
pub mod decompose;
pub mod error;
pub mod hedging;
pub mod models;
pub mod scenario;
pub mod transport;

pub use error::{Error, Result};
