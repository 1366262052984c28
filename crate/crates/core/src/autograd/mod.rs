//! Reverse-mode automatic differentiation over [`DenseTensor`] values and
//! the neural-network layers used by the factor generators.
//!
//! [`DenseTensor`]: crate::tensor::DenseTensor

mod conv;
mod norm;
mod ops;
mod tape;

pub use conv::{ConvSpec, UpsampleMode};
pub use norm::NORM_EPS;
pub use ops::{Activation, BinaryOp};
pub use tape::{BackwardCtx, BackwardFn, Gradients, Tape, Var};
