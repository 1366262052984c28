use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, DenseTensor};

const DENOM_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct NmfResult {
    /// `M × k`, non-negative.
    pub w: DenseTensor,
    /// `k × N`, non-negative.
    pub h: DenseTensor,
    /// `‖X − WH‖²_F` before the first and after every iteration.
    pub objective: Vec<f64>,
}

impl NmfResult {
    pub fn reconstruct(&self) -> DenseTensor {
        self.w.matmul(&self.h).expect("conformable factors")
    }
}

/// Lee–Seung multiplicative updates for the Frobenius objective.
pub fn nmf_multiplicative(x: &DenseTensor, k: usize, iters: usize, seed: u64) -> Result<NmfResult> {
    let (m, n) = x.matrix_dims()?;
    if k == 0 {
        return Err(Error::InvalidArgument("nmf rank 0".into()));
    }
    if x.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("nmf input has negative entries".into()));
    }
    let scale = (x.mean() / k as f64).sqrt();
    let mut r = rng::stream(seed, Stream::Baseline, 7);
    let mut w: Vec<f64> = (0..m * k).map(|_| scale * rng::normal(&mut r).abs()).collect();
    let mut h: Vec<f64> = (0..k * n).map(|_| scale * rng::normal(&mut r).abs()).collect();
    let xd = x.data();
    let objective_of = |w: &[f64], h: &[f64]| {
        let mut wh = vec![0.0; m * n];
        gemm_nn(w, h, &mut wh, m, k, n);
        wh.iter().zip(xd).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    };
    let mut objective = vec![objective_of(&w, &h)];
    for _ in 0..iters {
        // H ← H ⊙ (WᵀX) / (WᵀW H)
        let mut wtx = vec![0.0; k * n];
        gemm_tn(&w, xd, &mut wtx, k, m, n);
        let mut wtw = vec![0.0; k * k];
        gemm_tn(&w, &w, &mut wtw, k, m, k);
        let mut wtwh = vec![0.0; k * n];
        gemm_nn(&wtw, &h, &mut wtwh, k, k, n);
        for ((hv, num), den) in h.iter_mut().zip(&wtx).zip(&wtwh) {
            *hv *= num / den.max(DENOM_FLOOR);
        }
        // W ← W ⊙ (XHᵀ) / (W H Hᵀ)
        let mut xht = vec![0.0; m * k];
        gemm_nt(xd, &h, &mut xht, m, n, k);
        let mut hht = vec![0.0; k * k];
        gemm_nt(&h, &h, &mut hht, k, n, k);
        let mut whht = vec![0.0; m * k];
        gemm_nn(&w, &hht, &mut whht, m, k, k);
        for ((wv, num), den) in w.iter_mut().zip(&xht).zip(&whht) {
            *wv *= num / den.max(DENOM_FLOOR);
        }
        objective.push(objective_of(&w, &h));
    }
    Ok(NmfResult {
        w: DenseTensor::from_parts(vec![m, k], w),
        h: DenseTensor::from_parts(vec![k, n], h),
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positive(shape: &[usize], seed: u64) -> DenseTensor {
        let mut r = rng::stream(seed, Stream::Phantom, 0);
        DenseTensor::from_fn(shape, |_| 0.1 + rng::normal(&mut r).abs())
    }

    #[test]
    fn exact_rank_one() {
        let w = positive(&[10, 1], 1);
        let h = positive(&[1, 8], 2);
        let x = w.matmul(&h).unwrap();
        let r = nmf_multiplicative(&x, 1, 500, 3).unwrap();
        let rel = r.reconstruct().sub(&x).unwrap().frobenius_norm() / x.frobenius_norm();
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn objective_never_increases_and_factors_stay_nonnegative() {
        let x = positive(&[12, 9], 4);
        let r = nmf_multiplicative(&x, 3, 300, 5).unwrap();
        for pair in r.objective.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{pair:?}");
        }
        assert!(r.w.data().iter().chain(r.h.data()).all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_row_is_preserved() {
        let mut x = positive(&[6, 5], 6);
        for j in 0..5 {
            x.set(&[2, j], 0.0);
        }
        let r = nmf_multiplicative(&x, 2, 50, 7).unwrap();
        assert!((0..2).all(|c| r.w.get(&[2, c]) == 0.0));
    }

    #[test]
    fn negative_input_rejected() {
        let x = DenseTensor::new(vec![1, 2], vec![1.0, -1.0]).unwrap();
        assert!(nmf_multiplicative(&x, 1, 10, 0).is_err());
    }
}
