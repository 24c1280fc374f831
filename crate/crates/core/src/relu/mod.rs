//! Explicit ReLU realizations of piecewise polynomials.

pub mod compile;
pub mod gadgets;
pub mod network;

pub use compile::{compile_adaptive_net, compile_for_accuracy, mc_mismatch, CompileOptions, CompileReport};
pub use gadgets::{
    build_bump_net, build_clipped_trapezoid_net, build_multiproduct_net, build_patch_net, build_product_net, build_trapezoid_net,
};
pub use network::{covering_bound, stack_parallel, Layer, NetworkStats, ReluNetwork};
