//! Continuous-time random walks on weighted graphs in random environments.
//!
//! Exact return probabilities come from [`heat_kernel`] (dense spectral and
//! uniformization routes), simulated ones from [`sim`]. [`environments`]
//! builds tori, the 3-path and percolation ensembles, and [`harness`]
//! compares `E[p_t(o; G)]` with `E[p_t(o; H) | o ∈ V(H)]`.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod environments;
pub mod graph;
pub mod harness;
pub mod heat_kernel;
pub mod rng;
pub mod sim;
pub mod stats;

pub use graph::{GraphError, PercolationSubgraph, WeightedGraph};
pub use heat_kernel::{CurveMethod, HeatKernelError, ReturnCurve, TimeGrid};
