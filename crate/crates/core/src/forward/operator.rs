//! Linear measurement operators used by inverse problems.

use super::mask::CodedMask;
use super::radon::RadonProjector;
use crate::autograd::{Tape, Var};
use crate::error::Result;
use crate::tensor::DenseTensor;

#[derive(Clone, Debug)]
pub enum LinearOperator {
    Identity,
    /// Snapshot coding of `N₁ × N₂ × F` videos (`F` a multiple of the mask
    /// frame count).
    CodedExposure(CodedMask),
    /// Per-slice projection of `N × N × S` volumes.
    Radon(RadonProjector),
}

impl LinearOperator {
    pub fn name(&self) -> &'static str {
        match self {
            LinearOperator::Identity => "identity",
            LinearOperator::CodedExposure(_) => "coded_exposure",
            LinearOperator::Radon(_) => "radon",
        }
    }

    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        match self {
            LinearOperator::Identity => Ok(x.clone()),
            LinearOperator::CodedExposure(m) => m.apply_snapshots(x),
            LinearOperator::Radon(p) => p.project_volume(x),
        }
    }

    pub fn adjoint(&self, y: &DenseTensor) -> Result<DenseTensor> {
        match self {
            LinearOperator::Identity => Ok(y.clone()),
            LinearOperator::CodedExposure(m) => m.adjoint_snapshots(y),
            LinearOperator::Radon(p) => p.backproject_volume(y),
        }
    }

    /// Records the operator on the tape; its backward rule is the adjoint.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        if let LinearOperator::Identity = self {
            return Ok(x);
        }
        let out = self.apply(tape.value(x))?;
        let op = self.clone();
        Ok(tape.push_op(
            &[x],
            out,
            Box::new(move |ctx| vec![Some(op.adjoint(ctx.grad).expect("measurement gradient shape"))]),
        ))
    }
}
