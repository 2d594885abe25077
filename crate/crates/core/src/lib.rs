//! Floating discrete filters (FDF).
//!
//! A floating discrete filter is a convolution kernel with a fixed number of
//! non-null cells whose positions on the grid depend on a scalar equilibrium
//! value. High equilibrium spreads the cells along a spiral; low equilibrium
//! pulls them towards the anchor pixel, ending at the ordinary contiguous 3×3
//! kernel.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel_geometry`]: equilibrium levels, the spiral generator and the
//!   filter-spec text format.
//! - [`nn`]: dense tensors, sparse-offset convolution, the three small CNN
//!   architectures, backprop, SGD and checkpoints.
//! - [`equilibrium`]: output variance / entropy and the stopping rule.
//! - [`data`]: CIFAR-10 binary ingestion, seeded splits and synthetic data.
//! - [`engine`]: model banks, the inference cascade, the four evaluation
//!   criteria, the bi-level filter-order designer and experiment runs.

pub mod data;
pub mod engine;
pub mod equilibrium;
mod error;
pub mod kernel_geometry;
pub mod nn;

pub use error::{Error, Result};
