//! Problem description and the self-supervised fitting loop.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autograd::{Activation, Tape, Var};
use crate::error::{Error, Result};
use crate::forward::LinearOperator;
use crate::generators::{sample_latent_lane, FactorNetwork, NetworkBinding, NetworkKind, NetworkSpec};
use crate::metrics::{self, Peak};
use crate::optim::{AdamConfig, AdamState, LrSchedule};
use crate::tensor::DenseTensor;

/// How generator outputs are combined into the reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Two 1-D generators, `U Vᵀ`.
    Matrix,
    /// One 1-D generator per axis, summed rank-one outer products.
    Cp,
    /// A 2-D generator for the first two axes and a 1-D one for the third.
    Split2d1d,
    /// A single generator over the whole signal.
    SingleNd,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Matrix => "matrix",
            Mode::Cp => "cp",
            Mode::Split2d1d => "split_2d1d",
            Mode::SingleNd => "single_nd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    L2,
    L1,
}

/// Which epoch's factors and reconstruction are reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPolicy {
    BestLoss,
    Final,
}

/// Architecture shared by every generator of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorTemplate {
    pub kind: NetworkKind,
    pub depth: usize,
    pub hidden: usize,
    pub skip_channels: usize,
    pub out_activation: Activation,
    pub optimize_latent: bool,
}

impl Default for GeneratorTemplate {
    fn default() -> Self {
        Self {
            kind: NetworkKind::Overparam,
            depth: 3,
            hidden: 32,
            skip_channels: 4,
            out_activation: Activation::Identity,
            optimize_latent: true,
        }
    }
}

impl GeneratorTemplate {
    /// Encoder-decoder stages are widened to at least `out_channels`: the
    /// final 1x1 conv caps the factor rank at its input width.
    pub fn spec(&self, out_len: Vec<usize>, out_channels: usize) -> NetworkSpec {
        let mut s = match self.kind {
            NetworkKind::Overparam => {
                let hidden = self.hidden.max(out_channels);
                let mut s = NetworkSpec::overparam(out_len, out_channels, self.depth, hidden);
                s.skip_channels = self.skip_channels;
                s
            }
            NetworkKind::Underparam => {
                NetworkSpec::underparam(out_len, out_channels, self.depth, self.hidden)
            }
        };
        s.out_activation = self.out_activation;
        s.optimize_latent = self.optimize_latent;
        s
    }
}

/// Generator specs for `mode` on a signal of the given shape.
pub fn default_networks(
    mode: Mode,
    shape: &[usize],
    rank: usize,
    template: &GeneratorTemplate,
) -> Result<Vec<NetworkSpec>> {
    check_mode_shape(mode, shape)?;
    Ok(match mode {
        Mode::Matrix | Mode::Cp => shape.iter().map(|&n| template.spec(vec![n], rank)).collect(),
        Mode::Split2d1d => vec![
            template.spec(shape[..2].to_vec(), rank),
            template.spec(vec![shape[2]], rank),
        ],
        Mode::SingleNd => vec![template.spec(shape.to_vec(), 1)],
    })
}

fn check_mode_shape(mode: Mode, shape: &[usize]) -> Result<()> {
    let ok = match mode {
        Mode::Matrix => shape.len() == 2,
        Mode::Cp => shape.len() >= 2,
        Mode::Split2d1d => shape.len() == 3,
        Mode::SingleNd => (1..=3).contains(&shape.len()),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "mode {} cannot produce a signal of shape {shape:?}",
            mode.name()
        )))
    }
}

/// What the reconstruction is fit against.
#[derive(Clone, Debug)]
pub enum Target {
    Direct(DenseTensor),
    Inverse {
        measurements: DenseTensor,
        operator: LinearOperator,
        signal_shape: Vec<usize>,
    },
}

#[derive(Clone, Debug)]
pub struct DecompositionProblem {
    pub target: Target,
    pub mode: Mode,
    pub rank: usize,
    pub loss: LossKind,
    pub factor_l1_weight: f64,
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    pub networks: Vec<NetworkSpec>,
    pub seed: u64,
    /// Clean signal for PSNR tracking.
    pub oracle: Option<DenseTensor>,
    pub peak: Peak,
    pub snapshot: SnapshotPolicy,
}

impl DecompositionProblem {
    /// Direct fit with default loop settings.
    pub fn new(target: DenseTensor, mode: Mode, rank: usize, template: &GeneratorTemplate) -> Result<Self> {
        let networks = default_networks(mode, target.shape(), rank, template)?;
        Ok(Self::with_target(Target::Direct(target), mode, rank, networks))
    }

    pub fn inverse(
        measurements: DenseTensor,
        operator: LinearOperator,
        signal_shape: Vec<usize>,
        mode: Mode,
        rank: usize,
        template: &GeneratorTemplate,
    ) -> Result<Self> {
        let networks = default_networks(mode, &signal_shape, rank, template)?;
        let target = Target::Inverse {
            measurements,
            operator,
            signal_shape,
        };
        Ok(Self::with_target(target, mode, rank, networks))
    }

    fn with_target(target: Target, mode: Mode, rank: usize, networks: Vec<NetworkSpec>) -> Self {
        Self {
            target,
            mode,
            rank,
            loss: LossKind::L2,
            factor_l1_weight: 0.0,
            epochs: 2000,
            schedule: LrSchedule::fixed(1e-3),
            adam: AdamConfig::default(),
            networks,
            seed: 0,
            oracle: None,
            peak: Peak::DynamicRange,
            snapshot: SnapshotPolicy::BestLoss,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_schedule(mut self, schedule: LrSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_factor_l1(mut self, weight: f64) -> Self {
        self.factor_l1_weight = weight;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_oracle(mut self, oracle: DenseTensor) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_peak(mut self, peak: Peak) -> Self {
        self.peak = peak;
        self
    }

    pub fn with_snapshot(mut self, snapshot: SnapshotPolicy) -> Self {
        self.snapshot = snapshot;
        self
    }

    pub fn signal_shape(&self) -> &[usize] {
        match &self.target {
            Target::Direct(t) => t.shape(),
            Target::Inverse { signal_shape, .. } => signal_shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.rank == 0 {
            return bad("rank must be ≥ 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1".into());
        }
        if !(self.factor_l1_weight >= 0.0 && self.factor_l1_weight.is_finite()) {
            return bad(format!("factor_l1_weight {}", self.factor_l1_weight));
        }
        self.schedule.validate()?;
        let shape = self.signal_shape().to_vec();
        check_mode_shape(self.mode, &shape)?;
        let expected: Vec<(Vec<usize>, usize)> = match self.mode {
            Mode::Matrix | Mode::Cp => shape.iter().map(|&n| (vec![n], self.rank)).collect(),
            Mode::Split2d1d => vec![(shape[..2].to_vec(), self.rank), (vec![shape[2]], self.rank)],
            Mode::SingleNd => vec![(shape.clone(), 1)],
        };
        if self.networks.len() != expected.len() {
            return bad(format!(
                "mode {} needs {} generators, got {}",
                self.mode.name(),
                expected.len(),
                self.networks.len()
            ));
        }
        for (spec, (len, ch)) in self.networks.iter().zip(&expected) {
            if &spec.out_len != len || spec.out_channels != *ch {
                return bad(format!(
                    "generator emits [{}, {:?}] where [{ch}, {len:?}] is needed",
                    spec.out_channels, spec.out_len
                ));
            }
            spec.validate()?;
        }
        if let Some(o) = &self.oracle {
            if o.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    left: o.shape().to_vec(),
                    right: shape,
                });
            }
        }
        if let Target::Inverse {
            measurements,
            operator,
            ..
        } = &self.target
        {
            let probe = operator.apply(&DenseTensor::zeros(&shape))?;
            if probe.shape() != measurements.shape() {
                return Err(Error::ShapeMismatch {
                    left: probe.shape().to_vec(),
                    right: measurements.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    /// Factors with unit-norm columns (rank slices for the 2-D factor of the
    /// split mode); the single-network mode reports the signal itself.
    pub factors: Vec<DenseTensor>,
    /// Per-component scale folded out of the factors.
    pub weights: Vec<f64>,
    pub reconstruction: DenseTensor,
    pub loss_history: Vec<f64>,
    pub lr_history: Vec<f64>,
    /// Empty when no oracle was given.
    pub psnr_history: Vec<f64>,
    pub best_epoch: usize,
    pub best_reconstruction: DenseTensor,
    /// Seconds.
    pub wall_time_per_epoch: f64,
    pub parameter_count: usize,
}

impl DecompositionResult {
    pub fn best_psnr(&self) -> Option<f64> {
        self.psnr_history.get(self.best_epoch).copied()
    }

    pub fn final_psnr(&self) -> Option<f64> {
        self.psnr_history.last().copied()
    }

    /// One row per epoch: `epoch,lr,loss,psnr` (psnr blank without oracle).
    pub fn write_history_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "epoch,lr,loss,psnr")?;
        for (e, (lr, loss)) in self.lr_history.iter().zip(&self.loss_history).enumerate() {
            match self.psnr_history.get(e) {
                Some(p) => writeln!(out, "{e},{lr:.6e},{loss:.9e},{p:.6}")?,
                None => writeln!(out, "{e},{lr:.6e},{loss:.9e},")?,
            }
        }
        Ok(())
    }
}

pub fn run_inverse_problem(
    measurements: DenseTensor,
    operator: LinearOperator,
    mut problem: DecompositionProblem,
) -> Result<DecompositionResult> {
    let signal_shape = problem.signal_shape().to_vec();
    problem.target = Target::Inverse {
        measurements,
        operator,
        signal_shape,
    };
    run_decomposition(&problem)
}

/// Latent for the single-network mode: per channel, the outer product of
/// one random vector per axis.
fn product_latent(spec: &NetworkSpec, seed: u64) -> Result<DenseTensor> {
    let c = spec.latent_channels;
    let per_axis = spec
        .latent_extents
        .iter()
        .enumerate()
        .map(|(d, &n)| sample_latent_lane(&[n], c, seed, 100 + d as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut shape = vec![c];
    shape.extend_from_slice(&spec.latent_extents);
    Ok(DenseTensor::from_fn(&shape, |i| {
        per_axis
            .iter()
            .enumerate()
            .map(|(d, z)| z.get(&[i[0], i[d + 1]]))
            .product()
    }))
}

/// Composes generator outputs; returns the reconstruction and the factor
/// nodes in reporting orientation.
fn compose(tape: &mut Tape, mode: Mode, outputs: &[Var], shape: &[usize]) -> Result<(Var, Vec<Var>)> {
    match mode {
        Mode::Matrix | Mode::Cp => {
            let factors = outputs
                .iter()
                .map(|&o| tape.transpose(o))
                .collect::<Result<Vec<_>>>()?;
            let recon = if mode == Mode::Matrix {
                tape.compose_matrix(factors[0], factors[1])?
            } else {
                tape.cp_compose(&factors)?
            };
            Ok((recon, factors))
        }
        Mode::Split2d1d => {
            let w = tape.transpose(outputs[1])?;
            let recon = tape.split_compose(outputs[0], w)?;
            Ok((recon, vec![outputs[0], w]))
        }
        Mode::SingleNd => {
            let recon = tape.reshape(outputs[0], shape)?;
            Ok((recon, vec![recon]))
        }
    }
}

fn column_norms(m: &DenseTensor) -> Vec<f64> {
    let (rows, r) = (m.shape()[0], m.shape()[1]);
    (0..r)
        .map(|j| (0..rows).map(|i| m.data()[i * r + j].powi(2)).sum::<f64>().sqrt())
        .collect()
}

fn slice_norms(uv: &DenseTensor) -> Vec<f64> {
    let r = uv.shape()[0];
    let per = uv.len() / r;
    uv.data()
        .chunks(per)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Unit-norm components with the scales folded into a weight vector.
fn normalize_factors(mode: Mode, factors: &[DenseTensor]) -> (Vec<DenseTensor>, Vec<f64>) {
    let safe = |n: f64| if n > 0.0 { n } else { 1.0 };
    match mode {
        Mode::SingleNd => (factors.to_vec(), vec![1.0]),
        Mode::Matrix | Mode::Cp | Mode::Split2d1d => {
            let r = factors[factors.len() - 1].shape()[1];
            let mut weights = vec![1.0; r];
            let mut out = Vec::with_capacity(factors.len());
            for (k, f) in factors.iter().enumerate() {
                let sliced = mode == Mode::Split2d1d && k == 0;
                let norms = if sliced { slice_norms(f) } else { column_norms(f) };
                for (w, n) in weights.iter_mut().zip(&norms) {
                    *w *= n;
                }
                let mut g = f.clone();
                if sliced {
                    let per = g.len() / r;
                    for (chunk, n) in g.data_mut().chunks_mut(per).zip(&norms) {
                        chunk.iter_mut().for_each(|v| *v /= safe(*n));
                    }
                } else {
                    for row in g.data_mut().chunks_mut(r) {
                        for (v, n) in row.iter_mut().zip(&norms) {
                            *v /= safe(*n);
                        }
                    }
                }
                out.push(g);
            }
            (out, weights)
        }
    }
}

/// Fits every generator jointly with Adam, one tape per epoch.
pub fn run_decomposition(problem: &DecompositionProblem) -> Result<DecompositionResult> {
    problem.validate()?;
    let shape = problem.signal_shape().to_vec();
    let mut nets = problem
        .networks
        .iter()
        .enumerate()
        .map(|(lane, spec)| FactorNetwork::build(spec.clone(), problem.seed, lane as u64))
        .collect::<Result<Vec<_>>>()?;
    if problem.mode == Mode::SingleNd {
        let z = product_latent(nets[0].spec(), problem.seed)?;
        nets[0].set_latent(z)?;
    }
    let parameter_count = nets.iter().map(FactorNetwork::parameter_count).sum();
    let mut adams: Vec<AdamState> = nets
        .iter()
        .map(|n| AdamState::new(&n.trainables(), problem.adam).with_names(n.trainable_names()))
        .collect();
    let identity = LinearOperator::Identity;
    let (observed, op) = match &problem.target {
        Target::Direct(t) => (t, &identity),
        Target::Inverse {
            measurements,
            operator,
            ..
        } => (measurements, operator),
    };
    let peak = problem.oracle.as_ref().map(|o| problem.peak.resolve(o));
    let factor_total: usize = problem.networks.iter().map(NetworkSpec::output_len).sum();

    let mut loss_history = Vec::with_capacity(problem.epochs);
    let mut lr_history = Vec::with_capacity(problem.epochs);
    let mut psnr_history = Vec::new();
    let mut kept: Option<(DenseTensor, Vec<DenseTensor>)> = None;
    let mut kept_loss = f64::INFINITY;
    // (epoch, score, reconstruction); higher score is better.
    let mut best: Option<(usize, f64, DenseTensor)> = None;

    let start = Instant::now();
    for epoch in 0..problem.epochs {
        let lr = problem.schedule.lr(epoch)?;
        let mut tape = Tape::new();
        let bindings = nets
            .iter()
            .map(|n| n.forward(&mut tape))
            .collect::<Result<Vec<NetworkBinding>>>()?;
        let outputs: Vec<Var> = bindings.iter().map(|b| b.output).collect();
        let (recon, factor_vars) = compose(&mut tape, problem.mode, &outputs, &shape)?;
        let pred = op.forward(&mut tape, recon)?;
        let y = tape.constant(observed.clone());
        let mut loss = match problem.loss {
            LossKind::L2 => tape.mse(pred, y)?,
            LossKind::L1 => tape.mae(pred, y)?,
        };
        if problem.factor_l1_weight > 0.0 {
            let mut acc: Option<Var> = None;
            for &o in &outputs {
                let a = tape.activation(o, Activation::Abs);
                let s = tape.sum(a);
                acc = Some(match acc {
                    Some(p) => tape.add(p, s)?,
                    None => s,
                });
            }
            let pen = tape.scale(acc.expect("at least one generator"), problem.factor_l1_weight / factor_total as f64);
            loss = tape.add(loss, pen)?;
        }
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: loss_value,
            });
        }
        loss_history.push(loss_value);
        lr_history.push(lr);

        let recon_value = tape.value(recon);
        let take_snapshot = match problem.snapshot {
            SnapshotPolicy::BestLoss => loss_value < kept_loss,
            SnapshotPolicy::Final => epoch + 1 == problem.epochs,
        };
        if take_snapshot {
            kept_loss = loss_value;
            let f = factor_vars.iter().map(|&v| tape.value(v).clone()).collect();
            kept = Some((recon_value.clone(), f));
        }
        if let (Some(o), Some(p)) = (&problem.oracle, peak) {
            let q = metrics::psnr_from_mse(metrics::mse(recon_value, o)?, p);
            psnr_history.push(q);
            if best.as_ref().is_none_or(|(_, b, _)| q > *b) {
                best = Some((epoch, q, recon_value.clone()));
            }
        } else if best.as_ref().is_none_or(|(_, b, _)| -loss_value > *b) {
            best = Some((epoch, -loss_value, recon_value.clone()));
        }

        let grads = tape.backward(loss)?;
        for ((net, binding), adam) in nets.iter_mut().zip(&bindings).zip(&mut adams) {
            let vars = binding.trainable_vars(net.spec().optimize_latent);
            let g: Vec<DenseTensor> = vars.iter().map(|&v| grads.get_or_zeros(&tape, v)).collect();
            let mut values = net.trainables();
            adam.step(&mut values, &g, lr)?;
            net.set_trainables(values);
        }
    }
    let wall_time_per_epoch = start.elapsed().as_secs_f64() / problem.epochs as f64;

    let (reconstruction, raw) = kept.expect("at least one epoch ran");
    let (factors, weights) = normalize_factors(problem.mode, &raw);
    let (best_epoch, _, best_reconstruction) = best.expect("at least one epoch ran");
    Ok(DecompositionResult {
        factors,
        weights,
        reconstruction,
        loss_history,
        lr_history,
        psnr_history,
        best_epoch,
        best_reconstruction,
        wall_time_per_epoch,
        parameter_count,
    })
}
