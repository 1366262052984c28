//! Define-by-run reverse-mode differentiation.
//!
//! Every differentiable operation appends a node holding its value, the ids
//! of its inputs and a closure that maps the output gradient to input
//! gradients. Nodes are only ever appended, so the node list is already in
//! topological order and [`Tape::backward`] is a single reverse sweep.
//! A fresh tape is built for every optimization step.

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What a gradient rule sees when it runs.
pub struct BackwardCtx<'a> {
    /// Gradient of the loss with respect to this node's output.
    pub grad: &'a DenseTensor,
    /// Values of the node's inputs, in the order they were recorded.
    pub inputs: &'a [&'a DenseTensor],
    /// This node's forward value.
    pub output: &'a DenseTensor,
}

/// Gradient rule: one entry per input, `None` where the input gets nothing.
pub type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Option<DenseTensor>>>;

struct Node {
    value: DenseTensor,
    inputs: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, value: DenseTensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            inputs: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: DenseTensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &DenseTensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Appends an operation node. The gradient rule is dropped when no
    /// input needs a gradient.
    pub fn push_op(&mut self, inputs: &[Var], value: DenseTensor, backward: BackwardFn) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            inputs: inputs.iter().map(|v| v.0).collect(),
            backward: requires_grad.then_some(backward),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Propagates `d loss / d node` to every node the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(Error::InvalidArgument(format!(
                "backward root must be a scalar, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<DenseTensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(DenseTensor::from_parts(
            root.value.shape().to_vec(),
            vec![1.0],
        ));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            let Some(rule) = node.backward.as_ref() else {
                continue;
            };
            let Some(grad) = grads[id].as_ref() else {
                continue;
            };
            let inputs: Vec<&DenseTensor> =
                node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
            let ctx = BackwardCtx {
                grad,
                inputs: &inputs,
                output: &node.value,
            };
            let input_grads = rule(&ctx);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for (&parent, g) in node.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[parent].requires_grad {
                    continue;
                }
                debug_assert_eq!(g.shape(), self.nodes[parent].value.shape());
                match &mut grads[parent] {
                    Some(acc) => acc.add_assign_scaled(&g, 1.0),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<DenseTensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced it.
    pub fn get(&self, v: Var) -> Option<&DenseTensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient or zeros shaped like the node's value.
    pub fn get_or_zeros(&self, tape: &Tape, v: Var) -> DenseTensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| DenseTensor::zeros(tape.shape(v)))
    }

    pub fn take(&mut self, v: Var) -> Option<DenseTensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
