//! Classical decompositions used as reference points.

mod nmf;
mod parafac;
mod pca;
mod svd;

pub use nmf::{nmf_multiplicative, NmfResult};
pub use parafac::{parafac_als, unfold, CpModel};
pub use pca::{pca, principal_angle, Pca};
pub use svd::{truncated_svd, SvdResult};
