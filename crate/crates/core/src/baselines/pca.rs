use super::svd::truncated_svd;
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug)]
pub struct Pca {
    /// `features × k`, orthonormal columns.
    pub components: DenseTensor,
    pub mean: Vec<f64>,
    /// Variance captured by each component.
    pub explained_variance: Vec<f64>,
    /// Fraction of total variance captured by each component.
    pub explained_variance_ratio: Vec<f64>,
}

/// Principal components of `data` (`samples × features`).
///
/// Components are the top right singular vectors of the centered data,
/// obtained from the `features × features` sample covariance so that `k` may
/// exceed the sample count.
pub fn pca(data: &DenseTensor, k: usize) -> Result<Pca> {
    let (n, f) = data.matrix_dims()?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pca needs ≥ 2 samples, got {n}")));
    }
    if k == 0 || k > f {
        return Err(Error::InvalidArgument(format!(
            "pca with {k} components on {f} features"
        )));
    }
    let d = data.data();
    let mean: Vec<f64> = (0..f)
        .map(|j| (0..n).map(|i| d[i * f + j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; f * f];
    for i in 0..n {
        let row: Vec<f64> = (0..f).map(|j| d[i * f + j] - mean[j]).collect();
        for a in 0..f {
            let ra = row[a];
            for b in a..f {
                cov[a * f + b] += ra * row[b];
            }
        }
    }
    for a in 0..f {
        for b in a..f {
            cov[a * f + b] /= (n - 1) as f64;
            cov[b * f + a] = cov[a * f + b];
        }
    }
    let total: f64 = (0..f).map(|a| cov[a * f + a]).sum();
    let svd = truncated_svd(&DenseTensor::from_parts(vec![f, f], cov), k)?;
    let ratio = svd
        .s
        .iter()
        .map(|&s| if total > 0.0 { s / total } else { 0.0 })
        .collect();
    Ok(Pca {
        components: svd.u,
        mean,
        explained_variance: svd.s,
        explained_variance_ratio: ratio,
    })
}

/// Largest principal angle (radians) between the column spans of two
/// matrices with orthonormal columns.
pub fn principal_angle(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    let m = a.transpose()?.matmul(b)?;
    let k = m.shape()[0].min(m.shape()[1]);
    let s = truncated_svd(&m, k)?;
    let smallest = s.s.last().copied().unwrap_or(0.0).clamp(-1.0, 1.0);
    Ok(smallest.acos())
}
