//! Truncated SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Rotations orthogonalize the columns of the taller orientation of the
//! input, so the Gram side that is implicitly diagonalized is the smaller
//! one. Column norms are the singular values; the accumulated rotations are
//! the right singular vectors.

use crate::error::{Error, Result};
use crate::tensor::{transpose_buf, DenseTensor};

const TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `M × k`, orthonormal columns.
    pub u: DenseTensor,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `N × k`, orthonormal columns.
    pub v: DenseTensor,
}

impl SvdResult {
    /// `U · diag(S) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseTensor {
        let (m, k) = (self.u.shape()[0], self.s.len());
        let n = self.v.shape()[0];
        let (u, v) = (self.u.data(), self.v.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for r in 0..k {
                let a = u[i * k + r] * self.s[r];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * v[j * k + r];
                }
            }
        }
        DenseTensor::from_parts(vec![m, n], out)
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// Top-`k` singular triplets of a matrix.
pub fn truncated_svd(x: &DenseTensor, k: usize) -> Result<SvdResult> {
    let (m, n) = x.matrix_dims()?;
    if k == 0 || k > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "svd rank {k} outside 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    // Work on the orientation with at least as many rows as columns.
    let tall = m >= n;
    let (rows, cols, a) = if tall {
        (m, n, x.data().to_vec())
    } else {
        (n, m, transpose_buf(x.data(), m, n))
    };
    let (left, sigma, right) = jacobi(rows, cols, a);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));

    let mut u = vec![0.0; rows * k];
    let mut v = vec![0.0; cols * k];
    let mut s = Vec::with_capacity(k);
    for (slot, &c) in order.iter().take(k).enumerate() {
        s.push(sigma[c]);
        for i in 0..rows {
            u[i * k + slot] = left[i * cols + c];
        }
        for j in 0..cols {
            v[j * k + slot] = right[j * cols + c];
        }
    }
    complete_basis(&mut u, rows, k, &s);
    for slot in 0..k {
        let (mut best, mut big) = (0.0, 0.0f64);
        for i in 0..rows {
            let val = u[i * k + slot];
            if val.abs() > big {
                big = val.abs();
                best = val;
            }
        }
        if best < 0.0 {
            for i in 0..rows {
                u[i * k + slot] = -u[i * k + slot];
            }
            for j in 0..cols {
                v[j * k + slot] = -v[j * k + slot];
            }
        }
    }
    let u = DenseTensor::from_parts(vec![rows, k], u);
    let v = DenseTensor::from_parts(vec![cols, k], v);
    Ok(if tall {
        SvdResult { u, s, v }
    } else {
        SvdResult { u: v, s, v: u }
    })
}

/// Returns (normalized columns, column norms, accumulated rotations), all
/// row-major with `cols` columns.
fn jacobi(rows: usize, cols: usize, mut a: Vec<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; cols * cols];
    for i in 0..cols {
        v[i * cols + i] = 1.0;
    }
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (a[i * cols + p], a[i * cols + q]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[i * cols + p], a[i * cols + q]);
                    a[i * cols + p] = c * x - s * y;
                    a[i * cols + q] = s * x + c * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[i * cols + p], v[i * cols + q]);
                    v[i * cols + p] = c * x - s * y;
                    v[i * cols + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![0.0; cols];
    for (j, s) in sigma.iter_mut().enumerate() {
        *s = (0..rows).map(|i| a[i * cols + j].powi(2)).sum::<f64>().sqrt();
        if *s > 0.0 {
            for i in 0..rows {
                a[i * cols + j] /= *s;
            }
        }
    }
    (a, sigma, v)
}

/// Replaces left vectors of (numerically) zero singular values with unit
/// vectors orthogonal to the rest.
fn complete_basis(u: &mut [f64], rows: usize, k: usize, s: &[f64]) {
    let smax = s.first().copied().unwrap_or(0.0);
    let mut candidate = 0;
    for slot in 0..k {
        if s[slot] > 1e-13 * smax.max(f64::MIN_POSITIVE) {
            continue;
        }
        loop {
            let mut e = vec![0.0; rows];
            e[candidate % rows] = 1.0;
            candidate += 1;
            for other in 0..k {
                if other == slot || (other > slot && s[other] <= 1e-13 * smax) {
                    continue;
                }
                let d: f64 = (0..rows).map(|i| u[i * k + other] * e[i]).sum();
                for (i, ev) in e.iter_mut().enumerate() {
                    *ev -= d * u[i * k + other];
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for (i, ev) in e.iter().enumerate() {
                    u[i * k + slot] = ev / norm;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    fn gaussian(shape: &[usize], seed: u64) -> DenseTensor {
        let mut r = rng::stream(seed, Stream::Baseline, 1);
        DenseTensor::from_fn(shape, |_| rng::normal(&mut r))
    }

    fn orthonormality_error(q: &DenseTensor) -> f64 {
        let g = q.transpose().unwrap().matmul(q).unwrap();
        let k = g.shape()[0];
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(&[i, j]) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn diagonal_case() {
        let x = DenseTensor::from_fn(&[3, 3], |i| if i[0] == i[1] { 3.0 - i[0] as f64 } else { 0.0 });
        let r = truncated_svd(&x, 2).unwrap();
        assert!((r.s[0] - 3.0).abs() < 1e-14 && (r.s[1] - 2.0).abs() < 1e-14);
        let rec = r.reconstruct();
        assert!(rec.get(&[2, 2]).abs() < 1e-14);
        assert!((rec.get(&[0, 0]) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn exact_on_low_rank_and_orthonormal() {
        for (m, n, k) in [(12, 9, 3), (7, 15, 4), (20, 20, 5)] {
            let a = gaussian(&[m, k], 1);
            let b = gaussian(&[n, k], 2);
            let x = a.matmul(&b.transpose().unwrap()).unwrap();
            let r = truncated_svd(&x, k).unwrap();
            let res = r.reconstruct().sub(&x).unwrap().frobenius_norm();
            assert!(res < 1e-9 * x.frobenius_norm());
            assert!(orthonormality_error(&r.u) < 1e-8);
            assert!(orthonormality_error(&r.v) < 1e-8);
            assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_still_orthonormal() {
        let a = gaussian(&[6, 1], 3);
        let x = a.matmul(&a.transpose().unwrap()).unwrap();
        let r = truncated_svd(&x, 4).unwrap();
        assert!(orthonormality_error(&r.u) < 1e-8);
        assert!(r.s[1] < 1e-10 * r.s[0]);
    }

    #[test]
    fn optimal_against_random_competitors() {
        let x = gaussian(&[8, 6], 4);
        let r = truncated_svd(&x, 3).unwrap();
        let best = r.reconstruct().sub(&x).unwrap().frobenius_norm();
        for seed in 0..100 {
            let a = gaussian(&[8, 3], 100 + seed);
            let b = gaussian(&[3, 6], 300 + seed);
            let c = a.matmul(&b).unwrap();
            // Best scaling of the competitor, to be generous.
            let scale = c.dot(&x) / c.dot(&c);
            let res = c.scale(scale).sub(&x).unwrap().frobenius_norm();
            assert!(best <= res);
        }
    }

    #[test]
    fn rank_out_of_range() {
        let x = gaussian(&[4, 3], 5);
        assert!(truncated_svd(&x, 0).is_err());
        assert!(truncated_svd(&x, 4).is_err());
    }
}
