//! Reconstruction quality: MSE, PSNR and windowed SSIM.

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// PSNR reported when the two signals are identical.
pub const PSNR_CAP_DB: f64 = 200.0;

/// How the PSNR peak is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Peak {
    /// `max(ref) − min(ref)`.
    DynamicRange,
    Value(f64),
}

impl Peak {
    pub fn resolve(self, reference: &DenseTensor) -> f64 {
        match self {
            Peak::DynamicRange => {
                let r = reference.max() - reference.min();
                if r > 0.0 {
                    r
                } else {
                    1.0
                }
            }
            Peak::Value(p) => p,
        }
    }

    pub fn describe(self) -> String {
        match self {
            Peak::DynamicRange => "peak=dynamic_range(ref)".into(),
            Peak::Value(p) => format!("peak={p}"),
        }
    }
}

pub fn mse(x: &DenseTensor, reference: &DenseTensor) -> Result<f64> {
    x.check_same_shape(reference)?;
    let s: f64 = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(s / x.len() as f64)
}

/// `10·log₁₀(peak² / mse)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &DenseTensor, reference: &DenseTensor, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument(format!("psnr peak {peak}")));
    }
    Ok(psnr_from_mse(mse(x, reference)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

/// Mean SSIM over every fully-contained Gaussian window. Rank-3 inputs are
/// treated as a stack of 2-D slices along the last axis and averaged.
pub fn ssim(x: &DenseTensor, reference: &DenseTensor, params: &SsimParams) -> Result<f64> {
    x.check_same_shape(reference)?;
    match x.ndim() {
        2 => ssim_2d(x, reference, params),
        3 => {
            let s = x.shape()[2];
            let mut acc = 0.0;
            for k in 0..s {
                acc += ssim_2d(&x.slice_last(k), &reference.slice_last(k), params)?;
            }
            Ok(acc / s as f64)
        }
        _ => Err(Error::InvalidArgument(format!(
            "ssim needs 2-D or 3-D input, got {:?}",
            x.shape()
        ))),
    }
}

fn ssim_2d(x: &DenseTensor, y: &DenseTensor, p: &SsimParams) -> Result<f64> {
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let win = p.window;
    if win % 2 == 0 || win == 0 {
        return Err(Error::InvalidArgument(format!("ssim window {win} must be odd")));
    }
    if win > h || win > w {
        return Err(Error::InvalidArgument(format!(
            "ssim window {win} exceeds image {h}x{w}"
        )));
    }
    let half = (win / 2) as f64;
    let g1: Vec<f64> = (0..win)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * p.sigma * p.sigma)).exp())
        .collect();
    let norm: f64 = g1.iter().sum::<f64>().powi(2);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let (xd, yd) = (x.data(), y.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for i0 in 0..=h - win {
        for j0 in 0..=w - win {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for a in 0..win {
                for b in 0..win {
                    let wgt = g1[a] * g1[b] / norm;
                    let idx = (i0 + a) * w + j0 + b;
                    let (xv, yv) = (xd[idx], yd[idx]);
                    mx += wgt * xv;
                    my += wgt * yv;
                    sxx += wgt * xv * xv;
                    syy += wgt * yv * yv;
                    sxy += wgt * xv * yv;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityReport {
    /// MSE and PSNR always; SSIM when the input is 2-D/3-D and large enough
    /// for the window (NaN otherwise).
    pub fn compute(x: &DenseTensor, reference: &DenseTensor, peak: Peak) -> Result<Self> {
        let p = peak.resolve(reference);
        let m = mse(x, reference)?;
        let params = SsimParams {
            dynamic_range: p,
            ..SsimParams::default()
        };
        let ssim = ssim(x, reference, &params).unwrap_or(f64::NAN);
        Ok(Self {
            mse: m,
            psnr: psnr_from_mse(m, p),
            ssim,
        })
    }

    pub const CSV_HEADER: &'static str = "mse,psnr_db,ssim";

    pub fn csv_row(&self) -> String {
        format!("{:.9e},{:.6},{:.6}", self.mse, self.psnr, self.ssim)
    }
}
