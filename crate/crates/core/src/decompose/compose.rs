//! Assembling reconstructions from factors.
//!
//! * matrix: `U Vᵀ`
//! * CP / PARAFAC: `T[i₁..i_k] = Σ_r Π_j F_j[i_j, r]`
//! * split: `T[i, j, l] = Σ_r UV[r, i, j] · W[l, r]`, a 2-D factor image per
//!   rank component times a 1-D fiber.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{gemm_nn, numel, DenseTensor};

/// Rows of the Khatri–Rao product of `factors` (row-major over their
/// leading indices): `out[(i₁..i_m), r] = Π F_j[i_j, r]`.
fn khatri_rao(factors: &[&DenseTensor], rank: usize) -> Vec<f64> {
    let mut acc = vec![1.0; rank];
    for f in factors {
        let n = f.shape()[0];
        let fd = f.data();
        let rows = acc.len() / rank;
        let mut next = vec![0.0; rows * n * rank];
        for a in 0..rows {
            let prev = &acc[a * rank..(a + 1) * rank];
            for i in 0..n {
                let frow = &fd[i * rank..(i + 1) * rank];
                let dst = &mut next[(a * n + i) * rank..(a * n + i + 1) * rank];
                for ((d, p), q) in dst.iter_mut().zip(prev).zip(frow) {
                    *d = p * q;
                }
            }
        }
        acc = next;
    }
    acc
}

fn check_factors(factors: &[&DenseTensor]) -> Result<usize> {
    if factors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cp composition needs ≥ 2 factors, got {}",
            factors.len()
        )));
    }
    let rank = factors[0].matrix_dims()?.1;
    for f in factors {
        let (_, r) = f.matrix_dims()?;
        if r != rank {
            return Err(Error::ShapeMismatch {
                left: factors[0].shape().to_vec(),
                right: f.shape().to_vec(),
            });
        }
    }
    Ok(rank)
}

/// CP composition of `N_j × R` factors into an `N₁ × … × N_k` tensor.
pub fn cp_compose_values(factors: &[&DenseTensor]) -> Result<DenseTensor> {
    let rank = check_factors(factors)?;
    let kr = khatri_rao(factors, rank);
    let shape: Vec<usize> = factors.iter().map(|f| f.shape()[0]).collect();
    let data = kr.chunks(rank).map(|row| row.iter().sum()).collect();
    Ok(DenseTensor::from_parts(shape, data))
}

/// `d loss / d F_mode` given `d loss / d T` (an MTTKRP).
fn cp_factor_grad(grad: &DenseTensor, factors: &[&DenseTensor], mode: usize, rank: usize) -> DenseTensor {
    let shape = grad.shape();
    let before = numel(&shape[..mode]);
    let n = shape[mode];
    let after = numel(&shape[mode + 1..]);
    let left = khatri_rao(&factors[..mode], rank);
    let right = khatri_rao(&factors[mode + 1..], rank);
    // t[(a, i), r] = Σ_b G[a, i, b] · right[b, r]
    let mut t = vec![0.0; before * n * rank];
    gemm_nn(grad.data(), &right, &mut t, before * n, after, rank);
    let mut out = vec![0.0; n * rank];
    for a in 0..before {
        let lrow = &left[a * rank..(a + 1) * rank];
        for i in 0..n {
            let trow = &t[(a * n + i) * rank..(a * n + i + 1) * rank];
            let dst = &mut out[i * rank..(i + 1) * rank];
            for ((d, x), l) in dst.iter_mut().zip(trow).zip(lrow) {
                *d += x * l;
            }
        }
    }
    DenseTensor::from_parts(vec![n, rank], out)
}

impl Tape {
    /// `U Vᵀ` for `U: N×R`, `V: M×R`.
    pub fn compose_matrix(&mut self, u: Var, v: Var) -> Result<Var> {
        let (_, ru) = self.value(u).matrix_dims()?;
        let (_, rv) = self.value(v).matrix_dims()?;
        if ru != rv {
            return Err(Error::ShapeMismatch {
                left: self.shape(u).to_vec(),
                right: self.shape(v).to_vec(),
            });
        }
        self.matmul_nt(u, v)
    }

    /// Differentiable CP composition.
    pub fn cp_compose(&mut self, factors: &[Var]) -> Result<Var> {
        let values: Vec<&DenseTensor> = factors.iter().map(|&f| self.value(f)).collect();
        let rank = check_factors(&values)?;
        let out = cp_compose_values(&values)?;
        Ok(self.push_op(
            factors,
            out,
            Box::new(move |ctx| {
                (0..ctx.inputs.len())
                    .map(|m| Some(cp_factor_grad(ctx.grad, ctx.inputs, m, rank)))
                    .collect()
            }),
        ))
    }

    /// `UV: [R, N₁, N₂]` with `W: N₃ × R` into `N₁ × N₂ × N₃`.
    pub fn split_compose(&mut self, uv: Var, w: Var) -> Result<Var> {
        let s = self.shape(uv).to_vec();
        let (n3, r) = self.value(w).matrix_dims()?;
        if s.len() != 3 || s[0] != r {
            return Err(Error::ShapeMismatch {
                left: s,
                right: vec![n3, r],
            });
        }
        let flat = self.reshape(uv, &[r, s[1] * s[2]])?;
        let cols = self.transpose(flat)?;
        let t = self.matmul_nt(cols, w)?;
        self.reshape(t, &[s[1], s[2], n3])
    }
}
