//! Neural additive model: one GCU subnet per covariate, summed into the
//! event score, trained on the pairwise case-control loss.

pub mod activation;
pub mod loss;
mod model;
mod subnet;

pub use activation::{gcu, gcu_derivative};
pub use model::{Forward, NamGradients, NamModel, PairBatch, MODEL_FORMAT};
pub use subnet::{Dense, InputBounds, Preset, Subnet, SubnetCache, SubnetGradients, SubnetSpec};
