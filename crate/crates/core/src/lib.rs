//! Adaptive dyadic-tree approximation and its explicit ReLU network realization.
//!
//! The crate covers the full pipeline: dyadic cubes and proper subtrees, local
//! polynomial fitting under a probability measure, thresholding of refinement
//! quantities into adaptive partitions, compilation of the resulting piecewise
//! polynomial into a ReLU network with known size statistics, a small MLP
//! trainer for regression experiments, and the sweep harness that ties them
//! together.

pub mod error;
pub mod exec;
pub mod dyadic;
pub mod quadrature;
pub mod measure;
pub mod poly;
pub mod adaptive;
pub mod corpus;
pub mod relu;
pub mod trainer;
pub mod harness;

pub use error::{Error, Result};
pub use exec::Exec;
