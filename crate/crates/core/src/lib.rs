//! Low-rank matrix and tensor decomposition in which every factor is the
//! output of an untrained convolutional generator fit to a single signal,
//! plus the classical baselines, degradation models and linear forward
//! operators needed to compare against them.

pub mod autograd;
pub mod baselines;
pub mod bench;
pub mod decompose;
pub mod error;
pub mod forward;
pub mod generators;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use tensor::DenseTensor;
