//! Parallel-beam projection of image slices.
//!
//! The slice is treated as the bilinear interpolant of its pixel values.
//! Each pixel's interpolation kernel casts a unit-area shadow on the
//! detector axis, and each bin receives the part of that shadow it covers,
//! so bins hold exact line integrals averaged over the bin width. Every
//! angle receives the full image mass and the adjoint is the matching
//! back-projection.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionGeometry {
    /// Projection angles in radians.
    pub angles: Vec<f64>,
    pub bins: usize,
    /// Slice extent (slices are `size × size`).
    pub size: usize,
}

impl ProjectionGeometry {
    /// `count` angles evenly covering `[0, π)` and the default bin count.
    pub fn uniform(size: usize, count: usize) -> Self {
        let angles = (0..count)
            .map(|a| std::f64::consts::PI * a as f64 / count as f64)
            .collect();
        Self {
            angles,
            bins: default_bins(size),
            size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.is_empty() || self.size == 0 {
            return Err(Error::InvalidArgument("projection needs ≥ 1 angle and a non-empty slice".into()));
        }
        let min_bins = (std::f64::consts::SQRT_2 * (self.size - 1) as f64).ceil() as usize + 5;
        if self.bins < min_bins {
            return Err(Error::InvalidArgument(format!(
                "{} detector bins cannot cover a {}-pixel slice diagonal (need {min_bins})",
                self.bins, self.size
            )));
        }
        Ok(())
    }
}

/// `⌈√2·N⌉ + 4` (room for the interpolation footprint at the corners),
/// bumped to odd so the rotation centre falls on a bin centre.
pub fn default_bins(size: usize) -> usize {
    let b = (std::f64::consts::SQRT_2 * size as f64).ceil() as usize + 4;
    b | 1
}

/// CDF at `x` of a sum of independent zero-centred uniforms with the given
/// widths. Widths below 1e-3 are dropped; they shift the result by O(w²).
fn uniform_sum_cdf(x: f64, widths: &[f64]) -> f64 {
    let w: Vec<f64> = widths.iter().copied().filter(|&w| w >= 1e-3).collect();
    let n = w.len() as i32;
    let shift = w.iter().sum::<f64>() / 2.0;
    let y = x + shift;
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 2.0 * shift {
        return 1.0;
    }
    let mut acc = 0.0;
    for mask in 0..1usize << w.len() {
        let mut off = 0.0;
        for (k, wk) in w.iter().enumerate() {
            if mask >> k & 1 == 1 {
                off += wk;
            }
        }
        let z = y - off;
        if z > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * z.powi(n);
        }
    }
    let fact: f64 = (1..=n).map(f64::from).product();
    (acc / (fact * w.iter().product::<f64>())).clamp(0.0, 1.0)
}

/// Bins touched by one pixel footprint at most.
const SPAN: usize = 4;

/// Precomputed footprint weights for one geometry.
#[derive(Clone, Debug)]
pub struct RadonProjector {
    geom: ProjectionGeometry,
    /// Per (angle, pixel): first bin and the weights of `SPAN` consecutive bins.
    taps: Vec<(u32, [f64; SPAN])>,
}

impl RadonProjector {
    pub fn new(geom: ProjectionGeometry) -> Result<Self> {
        geom.validate()?;
        let n = geom.size;
        let c = (n as f64 - 1.0) / 2.0;
        let bc = (geom.bins as f64 - 1.0) / 2.0;
        let last = (geom.bins - SPAN) as f64;
        let mut taps = Vec::with_capacity(geom.angles.len() * n * n);
        for &theta in &geom.angles {
            let (s, co) = theta.sin_cos();
            let widths = [co.abs(), co.abs(), s.abs(), s.abs()];
            for i in 0..n {
                for j in 0..n {
                    let x = j as f64 - c;
                    let y = c - i as f64;
                    let u = x * co + y * s + bc;
                    let first = (u.floor() - 1.0).clamp(0.0, last);
                    let mut w = [0.0; SPAN];
                    for (k, wk) in w.iter_mut().enumerate() {
                        let lo = first + k as f64 - 0.5 - u;
                        *wk = uniform_sum_cdf(lo + 1.0, &widths) - uniform_sum_cdf(lo, &widths);
                    }
                    taps.push((first as u32, w));
                }
            }
        }
        Ok(Self { geom, taps })
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geom
    }

    fn project_slice(&self, img: &[f64], sino: &mut [f64]) {
        let nn = self.geom.size * self.geom.size;
        let bins = self.geom.bins;
        for (a, row) in sino.chunks_mut(bins).enumerate() {
            let taps = &self.taps[a * nn..(a + 1) * nn];
            for (&v, (b0, w)) in img.iter().zip(taps) {
                if v == 0.0 {
                    continue;
                }
                let out = &mut row[*b0 as usize..*b0 as usize + SPAN];
                for (o, wk) in out.iter_mut().zip(w) {
                    *o += wk * v;
                }
            }
        }
    }

    fn backproject_slice(&self, sino: &[f64], img: &mut [f64]) {
        let nn = self.geom.size * self.geom.size;
        let bins = self.geom.bins;
        for (a, row) in sino.chunks(bins).enumerate() {
            let taps = &self.taps[a * nn..(a + 1) * nn];
            for (p, (b0, w)) in img.iter_mut().zip(taps) {
                let src = &row[*b0 as usize..*b0 as usize + SPAN];
                *p += src.iter().zip(w).map(|(s, wk)| s * wk).sum::<f64>();
            }
        }
    }

    /// Sinogram `angles × bins` of a `size × size` image.
    pub fn project(&self, img: &DenseTensor) -> Result<DenseTensor> {
        let n = self.geom.size;
        if img.shape() != [n, n] {
            return Err(Error::ShapeMismatch {
                left: img.shape().to_vec(),
                right: vec![n, n],
            });
        }
        let mut sino = vec![0.0; self.geom.angles.len() * self.geom.bins];
        self.project_slice(img.data(), &mut sino);
        Ok(DenseTensor::from_parts(vec![self.geom.angles.len(), self.geom.bins], sino))
    }

    /// Adjoint of [`Self::project`].
    pub fn backproject(&self, sino: &DenseTensor) -> Result<DenseTensor> {
        let (a, b) = (self.geom.angles.len(), self.geom.bins);
        if sino.shape() != [a, b] {
            return Err(Error::ShapeMismatch {
                left: sino.shape().to_vec(),
                right: vec![a, b],
            });
        }
        let n = self.geom.size;
        let mut img = vec![0.0; n * n];
        self.backproject_slice(sino.data(), &mut img);
        Ok(DenseTensor::from_parts(vec![n, n], img))
    }

    /// Projects every slice `[.., .., s]` of a `size × size × S` volume into
    /// an `angles × bins × S` stack.
    pub fn project_volume(&self, vol: &DenseTensor) -> Result<DenseTensor> {
        let n = self.geom.size;
        if vol.ndim() != 3 || vol.shape()[..2] != [n, n] {
            return Err(Error::ShapeMismatch {
                left: vol.shape().to_vec(),
                right: vec![n, n, 0],
            });
        }
        let s = vol.shape()[2];
        let (a, b) = (self.geom.angles.len(), self.geom.bins);
        let mut out = vec![0.0; a * b * s];
        let mut img = vec![0.0; n * n];
        let mut sino = vec![0.0; a * b];
        for k in 0..s {
            for (p, v) in img.iter_mut().enumerate() {
                *v = vol.data()[p * s + k];
            }
            sino.iter_mut().for_each(|v| *v = 0.0);
            self.project_slice(&img, &mut sino);
            for (q, v) in sino.iter().enumerate() {
                out[q * s + k] = *v;
            }
        }
        Ok(DenseTensor::from_parts(vec![a, b, s], out))
    }

    pub fn backproject_volume(&self, sinos: &DenseTensor) -> Result<DenseTensor> {
        let (a, b) = (self.geom.angles.len(), self.geom.bins);
        if sinos.ndim() != 3 || sinos.shape()[..2] != [a, b] {
            return Err(Error::ShapeMismatch {
                left: sinos.shape().to_vec(),
                right: vec![a, b, 0],
            });
        }
        let s = sinos.shape()[2];
        let n = self.geom.size;
        let mut out = vec![0.0; n * n * s];
        let mut img = vec![0.0; n * n];
        let mut sino = vec![0.0; a * b];
        for k in 0..s {
            for (q, v) in sino.iter_mut().enumerate() {
                *v = sinos.data()[q * s + k];
            }
            img.iter_mut().for_each(|v| *v = 0.0);
            self.backproject_slice(&sino, &mut img);
            for (p, v) in img.iter().enumerate() {
                out[p * s + k] = *v;
            }
        }
        Ok(DenseTensor::from_parts(vec![n, n, s], out))
    }
}

/// Differentiable sinogram of one `size × size` slice.
pub fn radon_project(tape: &mut Tape, slice: Var, proj: &RadonProjector) -> Result<Var> {
    let out = proj.project(tape.value(slice))?;
    let p = proj.clone();
    Ok(tape.push_op(
        &[slice],
        out,
        Box::new(move |ctx| vec![Some(p.backproject(ctx.grad).expect("sinogram gradient shape"))]),
    ))
}

/// Differentiable per-slice projection of a volume.
pub fn radon_project_volume(tape: &mut Tape, vol: Var, proj: &RadonProjector) -> Result<Var> {
    let out = proj.project_volume(tape.value(vol))?;
    let p = proj.clone();
    Ok(tape.push_op(
        &[vol],
        out,
        Box::new(move |ctx| {
            vec![Some(p.backproject_volume(ctx.grad).expect("sinogram gradient shape"))]
        }),
    ))
}
