//! Seeded synthetic signals standing in for the real datasets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::cp_compose_values;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::DenseTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// CP/matrix product of iid `N(0, 1)` factors scaled by `1/√R`, so
    /// entries have unit variance. Not normalized to `[0, 1]`.
    GaussianLowrank,
    /// Product of random nonnegative piecewise-constant factors, divided by
    /// its maximum.
    PiecewiseLowrank,
    /// A bright square drifting across a soft background (`N₁ × N₂ × T`).
    MovingSquareVideo,
    /// Ellipsoids with distinct densities (`N × N × S`).
    SheppLikeVolume,
    /// Images mixed from a few smooth blob templates (`N × N × S`).
    FacesLikeTensor,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::GaussianLowrank => "gaussian_lowrank",
            PhantomKind::PiecewiseLowrank => "piecewise_lowrank",
            PhantomKind::MovingSquareVideo => "moving_square_video",
            PhantomKind::SheppLikeVolume => "shepp_like_volume",
            PhantomKind::FacesLikeTensor => "faces_like_tensor",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub data: DenseTensor,
    /// Ground-truth factors (`Nᵢ × R`) for the low-rank kinds.
    pub factors: Option<Vec<DenseTensor>>,
    /// Whether `data` was scaled into `[0, 1]`.
    pub normalized: bool,
}

pub fn make_phantom(kind: PhantomKind, extents: &[usize], rank: usize, seed: u64) -> Result<Phantom> {
    if extents.is_empty() || extents.contains(&0) {
        return Err(Error::InvalidArgument(format!("phantom extents {extents:?}")));
    }
    let mut g = rng::stream(seed, Stream::Phantom, kind as u64);
    match kind {
        PhantomKind::GaussianLowrank | PhantomKind::PiecewiseLowrank => {
            let min = *extents.iter().min().expect("non-empty");
            if rank == 0 || rank > min || extents.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "rank {rank} invalid for a low-rank phantom of shape {extents:?}"
                )));
            }
            let gaussian = kind == PhantomKind::GaussianLowrank;
            let factors: Vec<DenseTensor> = extents
                .iter()
                .map(|&n| {
                    if gaussian {
                        DenseTensor::from_fn(&[n, rank], |_| rng::normal(&mut g))
                    } else {
                        piecewise_factor(n, rank, &mut g)
                    }
                })
                .collect();
            let refs: Vec<&DenseTensor> = factors.iter().collect();
            let x = cp_compose_values(&refs)?;
            let data = if gaussian {
                x.scale(1.0 / (rank as f64).sqrt())
            } else {
                x.scale(1.0 / x.max())
            };
            Ok(Phantom {
                data,
                factors: Some(factors),
                normalized: !gaussian,
            })
        }
        PhantomKind::MovingSquareVideo => {
            let [h, w, t] = three(extents, kind)?;
            let side = (h.min(w) / 4).max(2);
            let (mut y, mut x) = (
                g.random_range(0..=h - side) as f64,
                g.random_range(0..=w - side) as f64,
            );
            let (mut vy, mut vx) = (if g.random::<bool>() { 1.0 } else { -1.0 }, if g.random::<bool>() { 1.0 } else { -1.0 });
            let mut data = vec![0.0; h * w * t];
            for f in 0..t {
                for i in 0..h {
                    for j in 0..w {
                        let background = 0.2 + 0.2 * (i + j) as f64 / (h + w) as f64;
                        let inside = (i as f64) >= y && (i as f64) < y + side as f64 && (j as f64) >= x && (j as f64) < x + side as f64;
                        data[(i * w + j) * t + f] = if inside { 1.0 } else { background };
                    }
                }
                // Bounce off the borders.
                if y + vy < 0.0 || y + vy + side as f64 > h as f64 {
                    vy = -vy;
                }
                if x + vx < 0.0 || x + vx + side as f64 > w as f64 {
                    vx = -vx;
                }
                y += vy;
                x += vx;
            }
            Ok(Phantom {
                data: DenseTensor::from_parts(vec![h, w, t], data),
                factors: None,
                normalized: true,
            })
        }
        PhantomKind::SheppLikeVolume => {
            let [n, n2, s] = three(extents, kind)?;
            if n != n2 {
                return Err(Error::InvalidArgument(format!("shepp volume needs square slices, got {extents:?}")));
            }
            // (centre x, centre y, semi-axis a, b, tilt, density) in unit-disc coordinates.
            let mut ellipses = vec![
                (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
                (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.6),
                (0.22, 0.0, 0.11, 0.31, -0.31, -0.2),
                (-0.22, 0.0, 0.16, 0.41, 0.31, -0.2),
                (0.0, 0.35, 0.21, 0.25, 0.0, 0.3),
            ];
            for _ in 0..3 {
                ellipses.push((
                    g.random_range(-0.4..0.4),
                    g.random_range(-0.5..0.5),
                    g.random_range(0.04..0.12),
                    g.random_range(0.04..0.12),
                    g.random_range(0.0..std::f64::consts::PI),
                    g.random_range(0.1..0.3),
                ));
            }
            let mut data = vec![0.0; n * n * s];
            for k in 0..s {
                // Ellipsoid cross-sections shrink towards the ends of the stack.
                let z = if s > 1 { 2.0 * k as f64 / (s - 1) as f64 - 1.0 } else { 0.0 };
                let shrink = (1.0 - 0.6 * z * z).sqrt();
                for i in 0..n {
                    for j in 0..n {
                        let px = 2.0 * (j as f64 + 0.5) / n as f64 - 1.0;
                        let py = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let mut v = 0.0;
                        for &(cx, cy, a, b, tilt, rho) in &ellipses {
                            let (st, ct) = f64::sin_cos(tilt);
                            let (dx, dy) = (px - cx, py - cy);
                            let u = (dx * ct + dy * st) / (a * shrink);
                            let w = (-dx * st + dy * ct) / (b * shrink);
                            if u * u + w * w <= 1.0 {
                                v += rho;
                            }
                        }
                        data[(i * n + j) * s + k] = v;
                    }
                }
            }
            let t = DenseTensor::from_parts(vec![n, n, s], data);
            Ok(Phantom {
                data: rescale(&t),
                factors: None,
                normalized: true,
            })
        }
        PhantomKind::FacesLikeTensor => {
            let [h, w, s] = three(extents, kind)?;
            let templates = rank.max(1);
            let blobs: Vec<Vec<(f64, f64, f64, f64)>> = (0..templates)
                .map(|_| {
                    (0..4)
                        .map(|_| {
                            (
                                g.random_range(0.2..0.8) * h as f64,
                                g.random_range(0.2..0.8) * w as f64,
                                g.random_range(0.08..0.25) * h.min(w) as f64,
                                g.random_range(0.3..1.0),
                            )
                        })
                        .collect()
                })
                .collect();
            let mix: Vec<Vec<f64>> = (0..s).map(|_| (0..templates).map(|_| g.random::<f64>()).collect()).collect();
            let t = DenseTensor::from_fn(&[h, w, s], |i| {
                let (y, x) = (i[0] as f64, i[1] as f64);
                blobs
                    .iter()
                    .zip(&mix[i[2]])
                    .map(|(bs, m)| {
                        m * bs
                            .iter()
                            .map(|&(cy, cx, r, a)| a * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * r * r)).exp())
                            .sum::<f64>()
                    })
                    .sum()
            });
            Ok(Phantom {
                data: rescale(&t),
                factors: None,
                normalized: true,
            })
        }
    }
}

fn three(extents: &[usize], kind: PhantomKind) -> Result<[usize; 3]> {
    <[usize; 3]>::try_from(extents)
        .map_err(|_| Error::InvalidArgument(format!("{} needs three extents, got {extents:?}", kind.name())))
}

fn rescale(t: &DenseTensor) -> DenseTensor {
    let (lo, hi) = (t.min(), t.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    t.map(|v| (v - lo) / span)
}

/// `n × rank` factor whose columns are step functions with 2–8 pieces and
/// levels in `[0, 1]`.
fn piecewise_factor(n: usize, rank: usize, g: &mut rng::Rng) -> DenseTensor {
    let mut f = DenseTensor::zeros(&[n, rank]);
    for r in 0..rank {
        let pieces = g.random_range(2..=8usize).min(n);
        let mut cuts: Vec<usize> = rand::seq::index::sample(g, n - 1, pieces - 1)
            .into_iter()
            .map(|c| c + 1)
            .collect();
        cuts.sort_unstable();
        cuts.push(n);
        let mut start = 0;
        for end in cuts {
            let level: f64 = g.random();
            for i in start..end {
                f.set(&[i, r], level);
            }
            start = end;
        }
    }
    f
}
