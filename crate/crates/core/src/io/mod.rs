//! File formats, experiment configs and synthetic phantoms.

pub mod config;
pub mod csv;
pub mod phantom;
pub mod tensorfile;

pub use config::{BenchSection, DataSection, DecomposeSection, ExperimentConfig, OperatorConfig};
pub use csv::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use phantom::{make_phantom, Phantom, PhantomKind};
pub use tensorfile::{read_tensor, write_tensor};
