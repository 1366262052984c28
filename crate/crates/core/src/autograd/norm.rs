use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Default variance floor for [`Tape::normalize_channels`].
pub const NORM_EPS: f64 = 1e-5;

impl Tape {
    /// Per-channel standardization over spatial positions followed by a
    /// per-channel affine map `gain · x̂ + bias`.
    pub fn normalize_channels(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let c = self.shape(x)[0];
        if self.value(gain).len() != c || self.value(bias).len() != c {
            return Err(Error::ShapeMismatch {
                left: self.shape(x).to_vec(),
                right: self.shape(gain).to_vec(),
            });
        }
        let n = self.value(x).len() / c;
        if n == 1 && eps == 0.0 {
            return Err(Error::InvalidArgument(
                "normalizing a single-element channel needs eps > 0".into(),
            ));
        }
        let xv = self.value(x).data();
        let gv = self.value(gain).data();
        let bv = self.value(bias).data();
        let mut xhat = vec![0.0; c * n];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; c * n];
        for ch in 0..c {
            let src = &xv[ch * n..(ch + 1) * n];
            let mean = src.iter().sum::<f64>() / n as f64;
            let var = src.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[ch] = is;
            for i in 0..n {
                let h = (src[i] - mean) * is;
                xhat[ch * n + i] = h;
                out[ch * n + i] = gv[ch] * h + bv[ch];
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push_op(
            &[x, gain, bias],
            DenseTensor::from_parts(shape.clone(), out),
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let gain = ctx.inputs[1].data();
                let mut dx = vec![0.0; c * n];
                let mut dg = vec![0.0; c];
                let mut db = vec![0.0; c];
                for ch in 0..c {
                    let gs = &g[ch * n..(ch + 1) * n];
                    let hs = &xhat[ch * n..(ch + 1) * n];
                    let sum_g: f64 = gs.iter().sum();
                    let sum_gh: f64 = gs.iter().zip(hs).map(|(a, b)| a * b).sum();
                    dg[ch] = sum_gh;
                    db[ch] = sum_g;
                    let k = gain[ch] * inv_std[ch];
                    let (mg, mgh) = (sum_g / n as f64, sum_gh / n as f64);
                    for i in 0..n {
                        dx[ch * n + i] = k * (gs[i] - mg - hs[i] * mgh);
                    }
                }
                vec![
                    Some(DenseTensor::from_parts(shape.clone(), dx)),
                    Some(DenseTensor::from_parts(ctx.inputs[1].shape().to_vec(), dg)),
                    Some(DenseTensor::from_parts(ctx.inputs[2].shape().to_vec(), db)),
                ]
            }),
        ))
    }
}
