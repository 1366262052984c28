//! ADAM and learning-rate schedules.

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<DenseTensor>,
    v: Vec<DenseTensor>,
    names: Vec<String>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[DenseTensor], config: AdamConfig) -> Self {
        Self {
            config,
            m: params.iter().map(|p| DenseTensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| DenseTensor::zeros(p.shape())).collect(),
            names: (0..params.len()).map(|i| format!("param[{i}]")).collect(),
            t: 0,
        }
    }

    /// Attaches names used in error messages.
    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.m.len());
        self.names = names;
        self
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, i: usize) -> &DenseTensor {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &DenseTensor {
        &self.v[i]
    }

    /// One bias-corrected ADAM update of every parameter, in place.
    ///
    /// All gradients are validated before anything is modified, so a
    /// rejected step leaves parameters and moments untouched.
    pub fn step(&mut self, params: &mut [DenseTensor], grads: &[DenseTensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "adam state tracks {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            p.check_same_shape(g)?;
            p.check_same_shape(&self.m[i])?;
            if !g.all_finite() {
                return Err(Error::NonFinite(format!("gradient of {}", self.names[i])));
            }
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {lr}")));
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let iter = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((pv, &gv), (mv, vv)) in iter {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Schedule shape; the peak rate lives in [`LrSchedule::base_lr`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Fixed,
    /// Multiply by `gamma` every `period` epochs.
    Step { gamma: f64, period: usize },
    /// Multiply by `gamma` every epoch.
    Exponential { gamma: f64 },
    /// Half-cosine from the base rate down to the floor at `t_max`.
    Cosine { t_max: usize },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Fixed => "fixed",
            ScheduleKind::Step { .. } => "step",
            ScheduleKind::Exponential { .. } => "exponential",
            ScheduleKind::Cosine { .. } => "cosine",
        }
    }

    /// Step and exponential settings used for the schedule study.
    pub fn standard_step() -> Self {
        ScheduleKind::Step {
            gamma: 0.99,
            period: 2000,
        }
    }

    pub fn standard_exponential() -> Self {
        ScheduleKind::Exponential { gamma: 0.9999 }
    }
}

/// Fraction of the base rate the cosine schedule never goes below.
pub const COSINE_FLOOR: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub base_lr: f64,
}

impl LrSchedule {
    pub fn new(kind: ScheduleKind, base_lr: f64) -> Result<Self> {
        let s = Self { kind, base_lr };
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(base_lr: f64) -> Self {
        Self {
            kind: ScheduleKind::Fixed,
            base_lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("base_lr {}", self.base_lr)));
        }
        match self.kind {
            ScheduleKind::Fixed => Ok(()),
            ScheduleKind::Step { gamma, period } => {
                if period == 0 || !(gamma > 0.0 && gamma <= 1.0) {
                    Err(Error::InvalidArgument(format!(
                        "step schedule needs period > 0 and gamma in (0, 1], got {period}, {gamma}"
                    )))
                } else {
                    Ok(())
                }
            }
            ScheduleKind::Exponential { gamma } => {
                if gamma > 0.0 && gamma <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("exponential gamma {gamma}")))
                }
            }
            ScheduleKind::Cosine { t_max } => {
                if t_max == 0 {
                    Err(Error::InvalidArgument("cosine schedule with t_max = 0".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Learning rate for `epoch` (0-based).
    pub fn lr(&self, epoch: usize) -> Result<f64> {
        self.validate()?;
        let base = self.base_lr;
        Ok(match self.kind {
            ScheduleKind::Fixed => base,
            ScheduleKind::Step { gamma, period } => base * gamma.powi((epoch / period) as i32),
            ScheduleKind::Exponential { gamma } => base * gamma.powf(epoch as f64),
            ScheduleKind::Cosine { t_max } => {
                let e = epoch.min(t_max) as f64;
                let cos = base * (1.0 + (std::f64::consts::PI * e / t_max as f64).cos()) / 2.0;
                cos.max(COSINE_FLOOR * base)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: f64) -> DenseTensor {
        DenseTensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![scalar(1.5), DenseTensor::full(&[2, 2], -0.5)];
        let before = p.clone();
        let g: Vec<_> = p.iter().map(|t| DenseTensor::zeros(t.shape())).collect();
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &g, 0.1).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        // m̂ = 4, v̂ = 16 at t = 1, so the update is 0.1 · 4 / (4 + 1e-8).
        let mut p = vec![scalar(0.0)];
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &[scalar(4.0)], 0.1).unwrap();
        let expected = -0.1 * 4.0 / (4.0 + 1e-8);
        assert!((p[0].item() - expected).abs() < 1e-15);
        assert!((p[0].item() + 0.0999999998).abs() < 1e-10);
    }

    #[test]
    fn converges_on_quadratic() {
        let target = DenseTensor::new(vec![3], vec![0.3, -0.7, 0.1]).unwrap();
        let mut p = vec![DenseTensor::zeros(&[3])];
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..500 {
            let g = p[0].sub(&target).unwrap().scale(2.0);
            adam.step(&mut p, &[g], 1e-2).unwrap();
        }
        assert!(p[0].sub(&target).unwrap().frobenius_norm() < 1e-3);
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = vec![scalar(0.0)];
        let mut adam = AdamState::new(&p, AdamConfig::default()).with_names(vec!["u.conv0".into()]);
        let bad = DenseTensor::from_parts(vec![1], vec![f64::NAN]);
        let err = adam.step(&mut p, &[bad], 0.1).unwrap_err();
        assert!(err.to_string().contains("u.conv0"));
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn schedule_examples() {
        let base = 1e-3;
        let fixed = LrSchedule::fixed(base);
        assert_eq!(fixed.lr(0).unwrap(), base);
        assert_eq!(fixed.lr(123_456).unwrap(), base);
        let step = LrSchedule::new(ScheduleKind::standard_step(), base).unwrap();
        assert!((step.lr(4000).unwrap() - base * 0.99 * 0.99).abs() < 1e-18);
        assert_eq!(step.lr(1999).unwrap(), base);
        let cos = LrSchedule::new(ScheduleKind::Cosine { t_max: 100 }, base).unwrap();
        assert!((cos.lr(100).unwrap() - COSINE_FLOOR * base).abs() < 1e-18);
        assert_eq!(cos.lr(0).unwrap(), base);
        assert!(LrSchedule::new(ScheduleKind::Cosine { t_max: 0 }, base).is_err());
    }

    proptest! {
        #[test]
        fn schedules_are_positive_and_non_increasing(
            base in 1e-6f64..1.0,
            e in 0usize..50_000,
            t_max in 1usize..20_000,
        ) {
            for kind in [
                ScheduleKind::Fixed,
                ScheduleKind::standard_step(),
                ScheduleKind::standard_exponential(),
                ScheduleKind::Cosine { t_max },
            ] {
                let s = LrSchedule::new(kind, base).unwrap();
                let (a, b) = (s.lr(e).unwrap(), s.lr(e + 1).unwrap());
                prop_assert!(a > 0.0 && b > 0.0);
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn constant_gradient_step_is_bounded(g in -100.0f64..100.0, steps in 1usize..200) {
            let lr = 0.01;
            let mut p = vec![scalar(0.0)];
            let mut adam = AdamState::new(&p, AdamConfig::default());
            for _ in 0..steps {
                let before = p[0].item();
                adam.step(&mut p, &[scalar(g)], lr).unwrap();
                prop_assert!((p[0].item() - before).abs() <= lr * (1.0 + 1e-9));
            }
        }
    }
}
