//! Volume-wise task-state decoding for 4D BOLD time series.
//!
//! Everything in this crate is pure computation over owned buffers: synthetic
//! run generation, a 3D convolutional encoder-decoder with hand-written
//! forward/backward rules, the sliding-window training and voting protocol,
//! the evaluation metric suite, and guided-backprop saliency with per-voxel
//! GLM mapping. File formats and the command-line front end live in the
//! companion `vwt-cli` crate.
//!
//! The crate is `no_std`-compatible (`--no-default-features --features libm`);
//! the default build enables `std` and `parallel` (rayon fan-out for batches,
//! prediction windows, and voxel regressions).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("vwt-core needs either the `std` feature or the `libm` feature");

pub mod error;
pub mod math;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod saliency;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
