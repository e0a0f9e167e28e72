//! Network resilience optimization via degree-preserving edge rewiring.
//!
//! The crate is organized around a small undirected [`Graph`](graph::Graph)
//! type. On top of it sit targeted-attack simulators ([`attack`]), the
//! resilience and utility metrics they feed ([`metrics`]), the edge-rewiring
//! environment whose reward is the step-wise objective gain ([`rewiring`]),
//! and the classical optimizers that search that environment ([`baselines`]).
//!
//! Everything is deterministic given an explicit 64-bit seed; no global RNG
//! state is used anywhere.

pub mod attack;
pub mod baselines;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod rewiring;

pub use error::{CoreError, FeasibilityViolation};
pub use graph::{EdgeRef, Graph};
