//! Elementwise arithmetic, matrix products, reductions, activations and
//! shape plumbing on the tape.

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, DenseTensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Softplus,
    Abs,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Activation::Abs => x.abs(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative, with the kink of relu/abs assigned slope 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Softplus => sigmoid(x),
            Activation::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }

    /// True when every output is ≥ 0 regardless of input.
    pub fn is_nonnegative(self) -> bool {
        matches!(
            self,
            Activation::Relu | Activation::Softplus | Activation::Abs | Activation::Sigmoid
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Softplus => "softplus",
            Activation::Abs => "abs",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    /// Elementwise `a op b`; `b` may be a one-element tensor broadcast over `a`.
    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let broadcast = av.shape() != bv.shape();
        if broadcast && !(bv.len() == 1 && bv.ndim() == 0) {
            return Err(Error::ShapeMismatch {
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let value = if broadcast {
            let s = bv.item();
            av.map(|x| match op {
                BinaryOp::Add => x + s,
                BinaryOp::Sub => x - s,
                BinaryOp::Mul => x * s,
            })
        } else {
            av.zip_map(bv, |x, y| match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
            })?
        };
        Ok(self.push_op(
            &[a, b],
            value,
            Box::new(move |ctx| {
                let g = ctx.grad;
                let (x, y) = (ctx.inputs[0], ctx.inputs[1]);
                let (ga, gb_full) = match op {
                    BinaryOp::Add => (g.clone(), g.clone()),
                    BinaryOp::Sub => (g.clone(), g.scale(-1.0)),
                    BinaryOp::Mul => {
                        if broadcast {
                            let s = y.item();
                            (g.scale(s), g.zip_map(x, |gv, xv| gv * xv).unwrap())
                        } else {
                            (
                                g.zip_map(y, |gv, yv| gv * yv).unwrap(),
                                g.zip_map(x, |gv, xv| gv * xv).unwrap(),
                            )
                        }
                    }
                };
                let gb = if broadcast {
                    DenseTensor::scalar(gb_full.sum())
                } else {
                    gb_full
                };
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).scale(c);
        self.push_op(&[x], value, Box::new(move |ctx| vec![Some(ctx.grad.scale(c))]))
    }

    /// Matrix product `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).matrix_dims()?;
        let (k2, n) = self.value(b).matrix_dims()?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push_op(
            &[a, b],
            value,
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let mut da = vec![0.0; m * k];
                gemm_nt(g, ctx.inputs[1].data(), &mut da, m, n, k);
                let mut db = vec![0.0; k * n];
                gemm_tn(ctx.inputs[0].data(), g, &mut db, k, m, n);
                vec![
                    Some(DenseTensor::from_parts(vec![m, k], da)),
                    Some(DenseTensor::from_parts(vec![k, n], db)),
                ]
            }),
        ))
    }

    /// `a · bᵀ` for `a: m×r`, `b: n×r`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, r) = self.value(a).matrix_dims()?;
        let (n, r2) = self.value(b).matrix_dims()?;
        if r != r2 {
            return Err(Error::ShapeMismatch {
                left: vec![m, r],
                right: vec![n, r2],
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_nt(self.value(a).data(), self.value(b).data(), &mut out, m, r, n);
        Ok(self.push_op(
            &[a, b],
            DenseTensor::from_parts(vec![m, n], out),
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let mut da = vec![0.0; m * r];
                gemm_nn(g, ctx.inputs[1].data(), &mut da, m, n, r);
                let mut db = vec![0.0; n * r];
                gemm_tn(g, ctx.inputs[0].data(), &mut db, n, m, r);
                vec![
                    Some(DenseTensor::from_parts(vec![m, r], da)),
                    Some(DenseTensor::from_parts(vec![n, r], db)),
                ]
            }),
        ))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).transpose()?;
        Ok(self.push_op(
            &[x],
            value,
            Box::new(|ctx| vec![Some(ctx.grad.transpose().unwrap())]),
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let original = self.shape(x).to_vec();
        Ok(self.push_op(
            &[x],
            value,
            Box::new(move |ctx| vec![Some(ctx.grad.reshape(&original).unwrap())]),
        ))
    }

    /// Sum of all elements as a rank-0 node.
    pub fn sum(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let value = DenseTensor::scalar(self.value(x).sum());
        self.push_op(
            &[x],
            value,
            Box::new(move |ctx| vec![Some(DenseTensor::full(&shape, ctx.grad.item()))]),
        )
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let n = self.value(x).len() as f64;
        let value = DenseTensor::scalar(self.value(x).sum() / n);
        self.push_op(
            &[x],
            value,
            Box::new(move |ctx| vec![Some(DenseTensor::full(&shape, ctx.grad.item() / n))]),
        )
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        if kind == Activation::Identity {
            return x;
        }
        let value = self.value(x).map(|v| kind.apply(v));
        self.push_op(
            &[x],
            value,
            Box::new(move |ctx| {
                let g = ctx
                    .grad
                    .zip_map(ctx.inputs[0], |gv, xv| gv * kind.derivative(xv))
                    .unwrap();
                vec![Some(g)]
            }),
        )
    }

    /// Concatenation along the leading (channel) axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rest = self.shape(parts[0])[1..].to_vec();
        let mut channels = Vec::with_capacity(parts.len());
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.shape()[1..] != rest[..] {
                return Err(Error::ShapeMismatch {
                    left: self.shape(parts[0]).to_vec(),
                    right: v.shape().to_vec(),
                });
            }
            channels.push(v.shape()[0]);
            data.extend_from_slice(v.data());
        }
        let mut shape = vec![channels.iter().sum()];
        shape.extend_from_slice(&rest);
        let inner: usize = rest.iter().product();
        Ok(self.push_op(
            parts,
            DenseTensor::from_parts(shape, data),
            Box::new(move |ctx| {
                let mut offset = 0;
                ctx.inputs
                    .iter()
                    .zip(&channels)
                    .map(|(inp, &c)| {
                        let len = c * inner;
                        let g = ctx.grad.data()[offset..offset + len].to_vec();
                        offset += len;
                        Some(DenseTensor::from_parts(inp.shape().to_vec(), g))
                    })
                    .collect()
            }),
        ))
    }

    /// Adds `bias[c]` to every element of channel `c` (leading axis).
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let c = self.shape(x)[0];
        if self.value(bias).len() != c {
            return Err(Error::ShapeMismatch {
                left: self.shape(x).to_vec(),
                right: self.shape(bias).to_vec(),
            });
        }
        let inner = self.value(x).len() / c;
        let mut value = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for (ch, chunk) in value.data_mut().chunks_mut(inner).enumerate() {
            chunk.iter_mut().for_each(|v| *v += b[ch]);
        }
        Ok(self.push_op(
            &[x, bias],
            value,
            Box::new(move |ctx| {
                let gb: Vec<f64> = ctx.grad.data().chunks(inner).map(|ch| ch.iter().sum()).collect();
                vec![
                    Some(ctx.grad.clone()),
                    Some(DenseTensor::from_parts(ctx.inputs[1].shape().to_vec(), gb)),
                ]
            }),
        ))
    }

    /// Mean squared error between two equally shaped nodes.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    /// Mean absolute error between two equally shaped nodes.
    pub fn mae(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let ab = self.activation(d, Activation::Abs);
        Ok(self.mean(ab))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> DenseTensor {
        DenseTensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn add_and_scalar_broadcast() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[2], &[1.0, 2.0]), true);
        let b = tape.leaf(t(&[2], &[3.0, 4.0]), true);
        let c = tape.add(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[4.0, 6.0]);

        let z = tape.leaf(DenseTensor::scalar(0.0), false);
        let p = tape.mul(a, z).unwrap();
        assert_eq!(tape.value(p).data(), &[0.0, 0.0]);
        let s = tape.sum(p);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(DenseTensor::zeros(&[2, 3]), false);
        let b = tape.leaf(DenseTensor::zeros(&[3, 2]), false);
        let err = tape.add(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[3, 2]"), "{err}");
        assert!(tape.matmul(a, a).is_err());
    }

    #[test]
    fn self_subtraction_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], &[1.0, -2.0, 5.0]), true);
        let d = tape.sub(x, x).unwrap();
        assert!(tape.value(d).data().iter().all(|&v| v == 0.0));
        let s = tape.sum(d);
        let g = tape.backward(s).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_small_cases() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]), false);
        let b = tape.leaf(t(&[2, 1], &[1.0, 1.0]), false);
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
        let eye = tape.leaf(DenseTensor::from_fn(&[2, 2], |i| (i[0] == i[1]) as u8 as f64), false);
        let same = tape.matmul(eye, a).unwrap();
        assert_eq!(tape.value(same), tape.value(a));
    }

    #[test]
    fn activations_closed_forms() {
        let x = t(&[3], &[-1.0, 0.0, 2.0]);
        assert_eq!(x.map(|v| Activation::Relu.apply(v)).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(Activation::Abs.apply(-3.0), 3.0);
        assert_eq!(Activation::Abs.apply(3.0), 3.0);
        assert!((Activation::Softplus.apply(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::Abs.derivative(0.0), 0.0);
        assert!(Activation::Softplus.apply(800.0).is_finite());
        assert!(Activation::Softplus.apply(-800.0) >= 0.0);
    }

    #[test]
    fn reductions() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]), true);
        let s = tape.sum(x);
        assert_eq!(tape.value(s).item(), 6.0);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
        let c = tape.leaf(DenseTensor::full(&[4, 2], 2.5), false);
        let m = tape.mean(c);
        assert_eq!(tape.value(m).item(), 2.5);
    }

    #[test]
    fn backward_examples() {
        let mut tape = Tape::new();
        let w = tape.leaf(t(&[2], &[1.0, -2.0]), true);
        let sq = tape.mul(w, w).unwrap();
        let l = tape.sum(sq);
        assert_eq!(tape.backward(l).unwrap().get(w).unwrap().data(), &[2.0, -4.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1], &[3.0]), true);
        let y = tape.add(x, x).unwrap();
        let l = tape.sum(y);
        assert_eq!(tape.backward(l).unwrap().get(x).unwrap().data(), &[2.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[3.0, 1.0]), true);
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn concat_and_bias_route_gradients() {
        let mut tape = Tape::new();
        let a = tape.leaf(DenseTensor::ones(&[1, 3]), true);
        let b = tape.leaf(DenseTensor::ones(&[2, 3]), true);
        let c = tape.concat(&[a, b]).unwrap();
        assert_eq!(tape.shape(c), &[3, 3]);
        let bias = tape.leaf(t(&[3], &[1.0, 2.0, 3.0]), true);
        let y = tape.add_channel_bias(c, bias).unwrap();
        assert_eq!(tape.value(y).get(&[2, 1]), 4.0);
        let l = tape.sum(y);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(bias).unwrap().data(), &[3.0, 3.0, 3.0]);
        assert_eq!(g.get(b).unwrap().shape(), &[2, 3]);
    }
}
