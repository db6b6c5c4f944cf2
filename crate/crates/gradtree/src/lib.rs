//! Gradient-descent decision trees: a dense, differentiable tree
//! parameterization trained with straight-through estimators, an ensemble
//! variant with instance-wise leaf weighting, a greedy CART baseline, and the
//! data plumbing to run them on CSV inputs.

pub mod cart;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod grad;
pub mod model_io;
pub mod optim;
pub mod tree;

pub use error::{GradTreeError, Result};
