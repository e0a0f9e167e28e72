//! Neural components for rewire-forge: a small dense autodiff engine, the
//! filtration graph encoder, and the PPO-trained edge-rewiring policy.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod firegnn;
pub mod policy;
pub mod tensor;

pub use error::{NnError, Result};
pub use tensor::{ParamSet, Tensor};
