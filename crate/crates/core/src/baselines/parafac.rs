//! CP / PARAFAC by alternating least squares.

use super::svd::truncated_svd;
use crate::decompose::cp_compose_values;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::{numel, DenseTensor};

const RIDGE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CpModel {
    /// Column scales folded out of the factors.
    pub weights: Vec<f64>,
    /// `N_j × R` factors with unit-norm columns.
    pub factors: Vec<DenseTensor>,
    /// Relative fit error `‖T − T̂‖ / ‖T‖` after each sweep.
    pub fit_history: Vec<f64>,
}

impl CpModel {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn reconstruct(&self) -> DenseTensor {
        let mut scaled = self.factors[0].clone();
        let r = self.rank();
        for (i, v) in scaled.data_mut().iter_mut().enumerate() {
            *v *= self.weights[i % r];
        }
        let mut refs: Vec<&DenseTensor> = vec![&scaled];
        refs.extend(self.factors[1..].iter());
        cp_compose_values(&refs).expect("consistent factors")
    }
}

/// Mode-`mode` unfolding `N_mode × Π_{others}` (other modes in order).
pub fn unfold(t: &DenseTensor, mode: usize) -> DenseTensor {
    let shape = t.shape();
    let before = numel(&shape[..mode]);
    let n = shape[mode];
    let after = numel(&shape[mode + 1..]);
    let mut out = vec![0.0; t.len()];
    let d = t.data();
    for a in 0..before {
        for i in 0..n {
            for b in 0..after {
                out[i * before * after + a * after + b] = d[(a * n + i) * after + b];
            }
        }
    }
    DenseTensor::from_parts(vec![n, before * after], out)
}

/// `M[i, r] = Σ T[.., i, ..] Π_{m≠mode} F_m[i_m, r]`.
fn mttkrp(t: &DenseTensor, factors: &[DenseTensor], mode: usize, rank: usize) -> Vec<f64> {
    let shape = t.shape();
    let k = shape.len();
    let mut out = vec![0.0; shape[mode] * rank];
    let mut idx = vec![0usize; k];
    let mut prod = vec![0.0; rank];
    for &val in t.data() {
        if val != 0.0 {
            prod.iter_mut().for_each(|p| *p = val);
            for (m, f) in factors.iter().enumerate() {
                if m == mode {
                    continue;
                }
                let row = &f.data()[idx[m] * rank..(idx[m] + 1) * rank];
                for (p, v) in prod.iter_mut().zip(row) {
                    *p *= v;
                }
            }
            let dst = &mut out[idx[mode] * rank..(idx[mode] + 1) * rank];
            for (d, p) in dst.iter_mut().zip(&prod) {
                *d += p;
            }
        }
        for a in (0..k).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Solves `X · A = B` for symmetric positive definite `A` (`r × r`), rows of
/// `B` independently, by Cholesky.
fn solve_spd_right(a: &[f64], b: &mut [f64], r: usize) -> Result<()> {
    let mut l = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..=i {
            let mut s = a[i * r + j];
            for p in 0..j {
                s -= l[i * r + p] * l[j * r + p];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidArgument("singular ALS normal equations".into()));
                }
                l[i * r + i] = s.sqrt();
            } else {
                l[i * r + j] = s / l[j * r + j];
            }
        }
    }
    for row in b.chunks_mut(r) {
        // Solve L y = row, then Lᵀ x = y.
        for i in 0..r {
            let mut s = row[i];
            for p in 0..i {
                s -= l[i * r + p] * row[p];
            }
            row[i] = s / l[i * r + i];
        }
        for i in (0..r).rev() {
            let mut s = row[i];
            for p in i + 1..r {
                s -= l[p * r + i] * row[p];
            }
            row[i] = s / l[i * r + i];
        }
    }
    Ok(())
}

fn gram(f: &DenseTensor, rank: usize) -> Vec<f64> {
    let n = f.shape()[0];
    let d = f.data();
    let mut g = vec![0.0; rank * rank];
    for i in 0..n {
        let row = &d[i * rank..(i + 1) * rank];
        for a in 0..rank {
            for b in 0..rank {
                g[a * rank + b] += row[a] * row[b];
            }
        }
    }
    g
}

/// Rank-`rank` CP model of `t` after `iters` ALS sweeps.
///
/// Factors start from the leading left singular vectors of each unfolding
/// (seeded Gaussian columns where the mode is shorter than the rank). Each
/// least-squares solve carries a `1e-10·I` ridge.
pub fn parafac_als(t: &DenseTensor, rank: usize, iters: usize, seed: u64) -> Result<CpModel> {
    if rank == 0 {
        return Err(Error::InvalidArgument("cp rank 0".into()));
    }
    if t.ndim() < 2 {
        return Err(Error::InvalidArgument(format!("cp needs ≥ 2 modes, got {:?}", t.shape())));
    }
    let k = t.ndim();
    let mut rng = rng::stream(seed, Stream::Baseline, 11);
    let mut factors: Vec<DenseTensor> = (0..k)
        .map(|m| {
            let n = t.shape()[m];
            let unf = unfold(t, m);
            let lead = rank.min(n).min(unf.shape()[1]);
            let svd = truncated_svd(&unf, lead)?;
            Ok(DenseTensor::from_fn(&[n, rank], |i| {
                if i[1] < lead {
                    svd.u.get(&[i[0], i[1]])
                } else {
                    rng::normal(&mut rng)
                }
            }))
        })
        .collect::<Result<_>>()?;
    let norm_t = t.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut fit_history = Vec::with_capacity(iters);
    for _ in 0..iters {
        for mode in 0..k {
            let mut g = vec![1.0; rank * rank];
            for (m, f) in factors.iter().enumerate() {
                if m != mode {
                    for (gv, v) in g.iter_mut().zip(gram(f, rank)) {
                        *gv *= v;
                    }
                }
            }
            for i in 0..rank {
                g[i * rank + i] += RIDGE;
            }
            let mut m = mttkrp(t, &factors, mode, rank);
            solve_spd_right(&g, &mut m, rank)?;
            factors[mode] = DenseTensor::from_parts(vec![t.shape()[mode], rank], m);
        }
        let refs: Vec<&DenseTensor> = factors.iter().collect();
        let rec = cp_compose_values(&refs)?;
        fit_history.push(rec.sub(t)?.frobenius_norm() / norm_t);
    }
    // Fold column norms into the weights.
    let mut weights = vec![1.0; rank];
    for f in &mut factors {
        let n = f.shape()[0];
        for r in 0..rank {
            let norm = (0..n).map(|i| f.get(&[i, r]).powi(2)).sum::<f64>().sqrt();
            weights[r] *= norm;
            if norm > 0.0 {
                for i in 0..n {
                    let v = f.get(&[i, r]) / norm;
                    f.set(&[i, r], v);
                }
            }
        }
    }
    Ok(CpModel {
        weights,
        factors,
        fit_history,
    })
}
