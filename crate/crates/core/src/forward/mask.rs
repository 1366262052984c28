//! Coded-exposure video sampling: each pixel integrates exactly one frame.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::DenseTensor;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct CodedMask {
    rows: usize,
    cols: usize,
    frames: usize,
    /// Sampled frame per pixel, row-major.
    frame_of: Vec<usize>,
}

/// Mask with a uniformly random frame per pixel.
pub fn make_coded_mask(rows: usize, cols: usize, frames: usize, seed: u64) -> Result<CodedMask> {
    if rows == 0 || cols == 0 || frames == 0 {
        return Err(Error::InvalidArgument(format!(
            "coded mask {rows}x{cols} with {frames} frames"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Mask, 0);
    let frame_of = (0..rows * cols).map(|_| rng.random_range(0..frames)).collect();
    Ok(CodedMask {
        rows,
        cols,
        frames,
        frame_of,
    })
}

impl CodedMask {
    pub fn extents(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.frames)
    }

    pub fn frame_of(&self, i: usize, j: usize) -> usize {
        self.frame_of[i * self.cols + j]
    }

    /// Binary `rows × cols × frames` tensor.
    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::from_fn(&[self.rows, self.cols, self.frames], |i| {
            (self.frame_of(i[0], i[1]) == i[2]) as u8 as f64
        })
    }

    fn check_video(&self, video: &DenseTensor) -> Result<()> {
        if video.shape() != [self.rows, self.cols, self.frames] {
            return Err(Error::ShapeMismatch {
                left: video.shape().to_vec(),
                right: vec![self.rows, self.cols, self.frames],
            });
        }
        Ok(())
    }

    /// `coded[i, j] = Σ_t mask[i, j, t] · video[i, j, t]`.
    pub fn apply(&self, video: &DenseTensor) -> Result<DenseTensor> {
        self.check_video(video)?;
        let t = self.frames;
        let data = self
            .frame_of
            .iter()
            .enumerate()
            .map(|(p, &f)| video.data()[p * t + f])
            .collect();
        Ok(DenseTensor::from_parts(vec![self.rows, self.cols], data))
    }

    /// `mask ⊙ broadcast(coded)`.
    pub fn adjoint(&self, coded: &DenseTensor) -> Result<DenseTensor> {
        if coded.shape() != [self.rows, self.cols] {
            return Err(Error::ShapeMismatch {
                left: coded.shape().to_vec(),
                right: vec![self.rows, self.cols],
            });
        }
        let t = self.frames;
        let mut out = vec![0.0; self.rows * self.cols * t];
        for (p, &f) in self.frame_of.iter().enumerate() {
            out[p * t + f] = coded.data()[p];
        }
        Ok(DenseTensor::from_parts(vec![self.rows, self.cols, t], out))
    }
}

impl CodedMask {
    /// Codes a `rows × cols × (k·frames)` video as `k` consecutive snapshots,
    /// reusing the mask for each, giving `rows × cols × k`.
    pub fn apply_snapshots(&self, video: &DenseTensor) -> Result<DenseTensor> {
        let k = self.snapshot_count(video.shape())?;
        let f = k * self.frames;
        let mut out = vec![0.0; self.rows * self.cols * k];
        for (p, &fr) in self.frame_of.iter().enumerate() {
            for g in 0..k {
                out[p * k + g] = video.data()[p * f + g * self.frames + fr];
            }
        }
        Ok(DenseTensor::from_parts(vec![self.rows, self.cols, k], out))
    }

    pub fn adjoint_snapshots(&self, coded: &DenseTensor) -> Result<DenseTensor> {
        let s = coded.shape();
        if s.len() != 3 || s[0] != self.rows || s[1] != self.cols {
            return Err(Error::ShapeMismatch {
                left: s.to_vec(),
                right: vec![self.rows, self.cols, 0],
            });
        }
        let k = s[2];
        let f = k * self.frames;
        let mut out = vec![0.0; self.rows * self.cols * f];
        for (p, &fr) in self.frame_of.iter().enumerate() {
            for g in 0..k {
                out[p * f + g * self.frames + fr] = coded.data()[p * k + g];
            }
        }
        Ok(DenseTensor::from_parts(vec![self.rows, self.cols, f], out))
    }

    fn snapshot_count(&self, shape: &[usize]) -> Result<usize> {
        if shape.len() != 3
            || shape[0] != self.rows
            || shape[1] != self.cols
            || shape[2] % self.frames != 0
        {
            return Err(Error::InvalidArgument(format!(
                "video {:?} is not {}x{}x(k*{})",
                shape, self.rows, self.cols, self.frames
            )));
        }
        Ok(shape[2] / self.frames)
    }
}

/// Differentiable [`CodedMask::apply`].
pub fn apply_mask(tape: &mut Tape, video: Var, mask: &CodedMask) -> Result<Var> {
    let out = mask.apply(tape.value(video))?;
    let m = mask.clone();
    Ok(tape.push_op(
        &[video],
        out,
        Box::new(move |ctx| vec![Some(m.adjoint(ctx.grad).expect("coded gradient shape"))]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(seed: u64, t: usize) -> DenseTensor {
        let mut r = rng::stream(seed, Stream::Phantom, 2);
        DenseTensor::from_fn(&[5, 6, t], |_| rng::normal(&mut r))
    }

    #[test]
    fn every_pixel_samples_exactly_one_frame() {
        let m = make_coded_mask(9, 7, 8, 3).unwrap();
        let t = m.to_tensor();
        for i in 0..9 {
            for j in 0..7 {
                let s: f64 = (0..8).map(|f| t.get(&[i, j, f])).sum();
                assert_eq!(s, 1.0);
            }
        }
    }

    #[test]
    fn single_frame_and_static_video() {
        let v = video(1, 1);
        let m = make_coded_mask(5, 6, 1, 0).unwrap();
        assert_eq!(m.apply(&v).unwrap().data(), v.data());

        let frame = video(2, 1);
        let still = DenseTensor::from_fn(&[5, 6, 4], |i| frame.get(&[i[0], i[1], 0]));
        let m = make_coded_mask(5, 6, 4, 0).unwrap();
        assert_eq!(m.apply(&still).unwrap().data(), frame.data());
    }

    #[test]
    fn adjoint_inner_product_identity() {
        let m = make_coded_mask(5, 6, 8, 4).unwrap();
        for seed in 0..5 {
            let v = video(10 + seed, 8);
            let mut r = rng::stream(seed, Stream::Phantom, 3);
            let y = DenseTensor::from_fn(&[5, 6], |_| rng::normal(&mut r));
            let lhs = m.apply(&v).unwrap().dot(&y);
            let rhs = v.dot(&m.adjoint(&y).unwrap());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn tape_gradient_is_the_adjoint() {
        let m = make_coded_mask(5, 6, 3, 5).unwrap();
        let mut tape = Tape::new();
        let v = tape.leaf(video(3, 3), true);
        let c = apply_mask(&mut tape, v, &m).unwrap();
        let l = tape.sum(c);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(v).unwrap(), &m.to_tensor());
    }

    #[test]
    fn snapshots_reduce_to_single_coding() {
        let m = make_coded_mask(5, 6, 4, 7).unwrap();
        let v = video(20, 8);
        let coded = m.apply_snapshots(&v).unwrap();
        assert_eq!(coded.shape(), &[5, 6, 2]);
        for g in 0..2 {
            let part = DenseTensor::from_fn(&[5, 6, 4], |i| v.get(&[i[0], i[1], g * 4 + i[2]]));
            assert_eq!(m.apply(&part).unwrap().data(), coded.slice_last(g).data());
        }
        let mut r = rng::stream(1, Stream::Phantom, 9);
        let y = DenseTensor::from_fn(&[5, 6, 2], |_| rng::normal(&mut r));
        let lhs = coded.dot(&y);
        let rhs = v.dot(&m.adjoint_snapshots(&y).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(m.apply_snapshots(&video(1, 6)).is_err());
    }
}
