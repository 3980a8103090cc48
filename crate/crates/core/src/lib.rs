//! Differentiable neural decision trees and forests for tabular binary
//! classification, together with the classical baselines, preprocessing,
//! synthetic cohort generation and metrics needed to run a staged feature
//! ablation experiment.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the
//! experiment runner and the command-line interface live in the `dndf`
//! companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod dataset;
mod error;
pub mod forest;
pub mod metrics;
pub mod ndt;
pub mod numcore;
pub mod preprocess;
mod rng;

pub use error::{Error, Result};
pub use numcore::Tensor;
pub use rng::seeded_rng;
