//! Channel-first convolution and upsampling over 1, 2 or 3 spatial axes.
//!
//! Tensors are laid out `[channels, s₁, .., s_d]`. Convolution is
//! cross-correlation with zero padding and is computed one `(input channel,
//! kernel offset)` pair at a time: the shifted input row is gathered once and
//! accumulated into every output channel, so no im2col buffer is needed.

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{numel, DenseTensor};
use serde::{Deserialize, Serialize};

const PAD: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Vec<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    /// "Same"-style spec: odd kernel `k` on every axis, padding `k/2`.
    pub fn same(dims: usize, k: usize, stride: usize, cin: usize, cout: usize) -> Self {
        Self {
            kernel: vec![k; dims],
            stride: vec![stride; dims],
            padding: vec![k / 2; dims],
            in_channels: cin,
            out_channels: cout,
        }
    }

    pub fn dims(&self) -> usize {
        self.kernel.len()
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.out_channels, self.in_channels];
        s.extend_from_slice(&self.kernel);
        s
    }

    /// Output spatial extents for the given input extents.
    pub fn output_extents(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != self.dims()
            || self.stride.len() != self.dims()
            || self.padding.len() != self.dims()
        {
            return Err(Error::InvalidArgument(format!(
                "conv spec with {} dims applied to extents {input:?}",
                self.dims()
            )));
        }
        (0..self.dims())
            .map(|d| {
                let padded = input[d] + 2 * self.padding[d];
                if self.stride[d] == 0 {
                    return Err(Error::InvalidArgument("conv stride 0".into()));
                }
                if self.kernel[d] == 0 || self.kernel[d] > padded {
                    return Err(Error::InvalidArgument(format!(
                        "kernel {} larger than padded input {padded} on axis {d}",
                        self.kernel[d]
                    )));
                }
                Ok((padded - self.kernel[d]) / self.stride[d] + 1)
            })
            .collect()
    }
}

/// For every kernel offset, the flat input position read by each output
/// position (or `PAD` where the read falls in the zero padding).
fn gather_tables(spec: &ConvSpec, input: &[usize], output: &[usize]) -> Vec<Vec<u32>> {
    let d = spec.dims();
    let n_out = numel(output);
    let n_k = numel(&spec.kernel);
    // Per axis: input coordinate for (kernel offset, output coordinate).
    let axis_maps: Vec<Vec<i64>> = (0..d)
        .map(|a| {
            let mut m = Vec::with_capacity(spec.kernel[a] * output[a]);
            for k in 0..spec.kernel[a] {
                for o in 0..output[a] {
                    let i = (o * spec.stride[a] + k) as i64 - spec.padding[a] as i64;
                    m.push(if i >= 0 && (i as usize) < input[a] { i } else { -1 });
                }
            }
            m
        })
        .collect();
    let mut tables = Vec::with_capacity(n_k);
    let mut kidx = vec![0usize; d];
    for _ in 0..n_k {
        let mut table = Vec::with_capacity(n_out);
        let mut oidx = vec![0usize; d];
        for _ in 0..n_out {
            let mut flat = 0usize;
            let mut inside = true;
            for a in 0..d {
                let i = axis_maps[a][kidx[a] * output[a] + oidx[a]];
                if i < 0 {
                    inside = false;
                    break;
                }
                flat = flat * input[a] + i as usize;
            }
            table.push(if inside { flat as u32 } else { PAD });
            advance(&mut oidx, output);
        }
        tables.push(table);
        advance(&mut kidx, &spec.kernel);
    }
    tables
}

fn advance(idx: &mut [usize], extents: &[usize]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < extents[a] {
            return;
        }
        idx[a] = 0;
    }
}

fn gather(row: &mut [f64], src: &[f64], table: &[u32]) {
    for (r, &t) in row.iter_mut().zip(table) {
        *r = if t == PAD { 0.0 } else { src[t as usize] };
    }
}

impl Tape {
    /// Cross-correlation of `x: [C_in, s..]` with `w: [C_out, C_in, k..]`.
    pub fn convolve_nd(&mut self, x: Var, w: Var, spec: &ConvSpec) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != spec.dims() + 1 || xs[0] != spec.in_channels {
            return Err(Error::ShapeMismatch {
                left: xs,
                right: spec.weight_shape(),
            });
        }
        if self.shape(w) != spec.weight_shape().as_slice() {
            return Err(Error::ShapeMismatch {
                left: self.shape(w).to_vec(),
                right: spec.weight_shape(),
            });
        }
        let in_ext = xs[1..].to_vec();
        let out_ext = spec.output_extents(&in_ext)?;
        let tables = gather_tables(spec, &in_ext, &out_ext);
        let (cin, cout) = (spec.in_channels, spec.out_channels);
        let n_in = numel(&in_ext);
        let n_out = numel(&out_ext);
        let n_k = tables.len();

        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut out = vec![0.0; cout * n_out];
        let mut row = vec![0.0; n_out];
        for ci in 0..cin {
            let src = &xv[ci * n_in..(ci + 1) * n_in];
            for (k, table) in tables.iter().enumerate() {
                gather(&mut row, src, table);
                for co in 0..cout {
                    let wk = wv[(co * cin + ci) * n_k + k];
                    let dst = &mut out[co * n_out..(co + 1) * n_out];
                    for (o, r) in dst.iter_mut().zip(&row) {
                        *o += wk * r;
                    }
                }
            }
        }
        let mut shape = vec![cout];
        shape.extend_from_slice(&out_ext);
        let wshape = spec.weight_shape();
        Ok(self.push_op(
            &[x, w],
            DenseTensor::from_parts(shape, out),
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let xv = ctx.inputs[0].data();
                let wv = ctx.inputs[1].data();
                let mut dx = vec![0.0; cin * n_in];
                let mut dw = vec![0.0; wv.len()];
                let mut row = vec![0.0; n_out];
                let mut drow = vec![0.0; n_out];
                for ci in 0..cin {
                    let src = &xv[ci * n_in..(ci + 1) * n_in];
                    let dsrc = &mut dx[ci * n_in..(ci + 1) * n_in];
                    for (k, table) in tables.iter().enumerate() {
                        gather(&mut row, src, table);
                        drow.iter_mut().for_each(|v| *v = 0.0);
                        for co in 0..cout {
                            let gco = &g[co * n_out..(co + 1) * n_out];
                            let widx = (co * cin + ci) * n_k + k;
                            dw[widx] += gco.iter().zip(&row).map(|(a, b)| a * b).sum::<f64>();
                            let wk = wv[widx];
                            for (d, gv) in drow.iter_mut().zip(gco) {
                                *d += wk * gv;
                            }
                        }
                        for (&t, &d) in table.iter().zip(&drow) {
                            if t != PAD {
                                dsrc[t as usize] += d;
                            }
                        }
                    }
                }
                vec![
                    Some(DenseTensor::from_parts(ctx.inputs[0].shape().to_vec(), dx)),
                    Some(DenseTensor::from_parts(wshape.clone(), dw)),
                ]
            }),
        ))
    }

    /// Upsamples every spatial axis (all but the leading channel axis) by
    /// its factor.
    pub fn upsample_nd(&mut self, x: Var, factors: &[usize], mode: UpsampleMode) -> Result<Var> {
        let ndim = self.shape(x).len();
        if factors.len() + 1 != ndim {
            return Err(Error::InvalidArgument(format!(
                "{} upsample factors for a tensor of rank {ndim}",
                factors.len()
            )));
        }
        if factors.contains(&0) {
            return Err(Error::InvalidArgument("upsample factor 0".into()));
        }
        let mut cur = x;
        for (a, &f) in factors.iter().enumerate() {
            if f > 1 {
                cur = self.upsample_axis(cur, a + 1, f, mode);
            }
        }
        Ok(cur)
    }

    fn upsample_axis(&mut self, x: Var, axis: usize, factor: usize, mode: UpsampleMode) -> Var {
        let shape = self.shape(x).to_vec();
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let m = n * factor;
        // (source index, weight) pairs feeding each output coordinate.
        let taps: Vec<[(usize, f64); 2]> = (0..m)
            .map(|o| match mode {
                UpsampleMode::Nearest => [(o / factor, 1.0), (0, 0.0)],
                UpsampleMode::Linear => {
                    let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
                    let i0 = (src.floor() as usize).min(n - 1);
                    let i1 = (i0 + 1).min(n - 1);
                    let w1 = (src - i0 as f64).clamp(0.0, 1.0);
                    [(i0, 1.0 - w1), (i1, w1)]
                }
            })
            .collect();
        let xv = self.value(x).data();
        let mut out = vec![0.0; outer * m * inner];
        for b in 0..outer {
            for (o, tap) in taps.iter().enumerate() {
                let dst = &mut out[(b * m + o) * inner..(b * m + o + 1) * inner];
                for &(i, wgt) in tap {
                    if wgt == 0.0 {
                        continue;
                    }
                    let src = &xv[(b * n + i) * inner..(b * n + i + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wgt * s;
                    }
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = m;
        self.push_op(
            &[x],
            DenseTensor::from_parts(out_shape, out),
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let mut dx = vec![0.0; outer * n * inner];
                for b in 0..outer {
                    for (o, tap) in taps.iter().enumerate() {
                        let src = &g[(b * m + o) * inner..(b * m + o + 1) * inner];
                        for &(i, wgt) in tap {
                            if wgt == 0.0 {
                                continue;
                            }
                            let dst = &mut dx[(b * n + i) * inner..(b * n + i + 1) * inner];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += wgt * s;
                            }
                        }
                    }
                }
                vec![Some(DenseTensor::from_parts(shape.clone(), dx))]
            }),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    Nearest,
    Linear,
}
