//! Seeded degradation models.

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::DenseTensor;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Rate below which Poisson draws use exact inversion.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// `X + N(0, σ²)`.
    Gaussian { sigma: f64 },
    /// Photon counts `P(λ_max · X)` plus Gaussian readout of `readout`
    /// photons, divided by `λ_max`.
    Poisson { lambda_max: f64, readout: f64 },
    /// `√((X + N(0,σ²))² + N(0,σ²)²)`.
    Rician { sigma: f64 },
    /// A `fraction` of entries (chosen without replacement) set to 0 or 1.
    SaltPepper { fraction: f64 },
    /// `X + a·(b·z₁ + z₂²)` with standard normal `z₁, z₂`.
    SkewedGaussian { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            NoiseKind::Gaussian { sigma } | NoiseKind::Rician { sigma } => sigma >= 0.0,
            NoiseKind::Poisson { lambda_max, readout } => lambda_max > 0.0 && readout >= 0.0,
            NoiseKind::SaltPepper { fraction } => (0.0..=1.0).contains(&fraction),
            NoiseKind::SkewedGaussian { a, b } => a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("noise parameters {:?}", self.kind)))
        }
    }
}

/// Poisson draw: inversion for small rates, rounded Gaussian otherwise.
pub fn poisson_sample(rng: &mut rng::Rng, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda < POISSON_INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u32;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        while u > cdf && k < 10_000 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k as f64
    } else {
        (lambda + lambda.sqrt() * rng::normal(rng)).round().max(0.0)
    }
}

/// Applies the degradation in `spec` to `x`.
pub fn degrade(x: &DenseTensor, spec: &NoiseSpec) -> Result<DenseTensor> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Stream::Noise, 0);
    Ok(match spec.kind {
        NoiseKind::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(x.clone());
            }
            x.map(|v| v + sigma * rng::normal(&mut rng))
        }
        NoiseKind::Poisson { lambda_max, readout } => {
            if x.data().iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument("poisson noise on negative signal".into()));
            }
            x.map(|v| {
                let counts = poisson_sample(&mut rng, lambda_max * v);
                let read = if readout > 0.0 {
                    readout * rng::normal(&mut rng)
                } else {
                    0.0
                };
                (counts + read) / lambda_max
            })
        }
        NoiseKind::Rician { sigma } => x.map(|v| {
            let a = v + sigma * rng::normal(&mut rng);
            let b = sigma * rng::normal(&mut rng);
            (a * a + b * b).sqrt()
        }),
        NoiseKind::SaltPepper { fraction } => {
            let n = x.len();
            let count = ((fraction * n as f64).round() as usize).min(n);
            let mut out = x.clone();
            for i in sample(&mut rng, n, count) {
                out.data_mut()[i] = if rng.random::<bool>() { 1.0 } else { 0.0 };
            }
            out
        }
        NoiseKind::SkewedGaussian { a, b } => x.map(|v| {
            let z1 = rng::normal(&mut rng);
            let z2 = rng::normal(&mut rng);
            v + a * (b * z1 + z2 * z2)
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> DenseTensor {
        DenseTensor::from_fn(&[8, 8], |i| (i[0] * 8 + i[1]) as f64 / 63.0)
    }

    #[test]
    fn zero_noise_cases() {
        let x = ramp();
        let g = degrade(&x, &NoiseSpec::new(NoiseKind::Gaussian { sigma: 0.0 }, 1)).unwrap();
        assert_eq!(g, x);
        let z = DenseTensor::zeros(&[20]);
        let p = NoiseSpec::new(NoiseKind::Poisson { lambda_max: 1000.0, readout: 0.0 }, 1);
        assert!(degrade(&z, &p).unwrap().data().iter().all(|&v| v == 0.0));
        let signed = x.map(|v| v - 0.5);
        let r = degrade(&signed, &NoiseSpec::new(NoiseKind::Rician { sigma: 0.0 }, 1)).unwrap();
        assert_eq!(r, signed.map(f64::abs));
    }

    #[test]
    fn poisson_moments() {
        let x = DenseTensor::full(&[10_000], 0.5);
        let p = NoiseSpec::new(NoiseKind::Poisson { lambda_max: 1000.0, readout: 0.0 }, 3);
        let y = degrade(&x, &p).unwrap();
        let mean = y.mean();
        let var = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        assert!((mean - 0.5).abs() < 0.01);
        let expected = 0.5 / 1000.0;
        assert!((var - expected).abs() < 0.2 * expected, "{var}");
    }

    #[test]
    fn small_rate_inversion_moments() {
        let mut r = rng::stream(5, Stream::Noise, 9);
        let draws: Vec<f64> = (0..20_000).map(|_| poisson_sample(&mut r, 3.0)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((mean - 3.0).abs() < 0.05 && (var - 3.0).abs() < 0.15);
    }

    #[test]
    fn poisson_rejects_negative_signal() {
        let x = DenseTensor::full(&[3], -0.1);
        let p = NoiseSpec::new(NoiseKind::Poisson { lambda_max: 10.0, readout: 0.0 }, 0);
        assert!(degrade(&x, &p).is_err());
    }

    #[test]
    fn salt_and_pepper_count() {
        let x = DenseTensor::full(&[1000], 0.5);
        let y = degrade(&x, &NoiseSpec::new(NoiseKind::SaltPepper { fraction: 0.1 }, 4)).unwrap();
        let hit: Vec<f64> = y.data().iter().copied().filter(|&v| v != 0.5).collect();
        assert_eq!(hit.len(), 100);
        assert!(hit.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(hit.contains(&0.0) && hit.contains(&1.0));
    }

    #[test]
    fn degradations_are_reproducible() {
        let x = ramp();
        for kind in [
            NoiseKind::Gaussian { sigma: 0.1 },
            NoiseKind::Poisson { lambda_max: 100.0, readout: 2.0 },
            NoiseKind::Rician { sigma: 0.02 },
            NoiseKind::SaltPepper { fraction: 0.2 },
            NoiseKind::SkewedGaussian { a: 0.3, b: 0.3 },
        ] {
            let s = NoiseSpec::new(kind, 17);
            let a = degrade(&x, &s).unwrap();
            let b = degrade(&x, &s).unwrap();
            assert_eq!(a.data(), b.data());
            assert_ne!(a, x);
        }
    }
}
