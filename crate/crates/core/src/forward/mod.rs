//! Degradation models and differentiable linear measurement operators.

pub mod mask;
pub mod noise;
pub mod operator;
pub mod radon;

pub use mask::{apply_mask, make_coded_mask, CodedMask};
pub use noise::{degrade, NoiseKind, NoiseSpec};
pub use operator::LinearOperator;
pub use radon::{default_bins, radon_project, radon_project_volume, ProjectionGeometry, RadonProjector};
