//! Factor composition and the decomposition training loop.

mod compose;
mod run;

pub use compose::cp_compose_values;
pub use run::{
    default_networks, run_decomposition, run_inverse_problem, DecompositionProblem, DecompositionResult,
    GeneratorTemplate, LossKind, Mode, SnapshotPolicy, Target,
};
