//! Untrained convolutional generators that emit one factor each.
//!
//! Two families are provided, both channel-first over 1, 2 or 3 spatial axes
//! and both ending in a 1×1 convolution with `out_channels` (the
//! decomposition rank) outputs:
//!
//! * [`NetworkKind::Overparam`]: an encoder-decoder with skip connections.
//!   Each level keeps a narrow 1×1 skip branch, downsamples with a stride-2
//!   convolution, recurses, upsamples and concatenates the skip. Hidden
//!   layers are conv → channel norm → LeakyReLU(0.2). These networks have
//!   many more weights than output entries.
//! * [`NetworkKind::Underparam`]: a deep decoder. A small latent grid is
//!   pushed through 1×1 convolutions, ×2 linear upsampling, ReLU and channel
//!   norm. These typically have fewer weights than output entries.

use crate::autograd::{Activation, ConvSpec, Tape, UpsampleMode, Var, NORM_EPS};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::{numel, DenseTensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

const HIDDEN_ACTIVATION: Activation = Activation::LeakyRelu(0.2);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Overparam,
    Underparam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub dims: usize,
    pub kind: NetworkKind,
    pub depth: usize,
    /// Channel width of each stage (length `depth`).
    pub hidden_channels: Vec<usize>,
    /// Width of the skip branches (overparam only).
    pub skip_channels: usize,
    pub kernel: usize,
    pub out_channels: usize,
    pub out_len: Vec<usize>,
    pub out_activation: Activation,
    pub latent_channels: usize,
    pub latent_extents: Vec<usize>,
    pub optimize_latent: bool,
}

impl NetworkSpec {
    /// Encoder-decoder generator with uniform stage width.
    pub fn overparam(out_len: Vec<usize>, out_channels: usize, depth: usize, hidden: usize) -> Self {
        Self {
            dims: out_len.len(),
            kind: NetworkKind::Overparam,
            depth,
            hidden_channels: vec![hidden; depth],
            skip_channels: 4,
            kernel: 3,
            out_channels,
            latent_extents: out_len.clone(),
            out_len,
            out_activation: Activation::Identity,
            latent_channels: hidden,
            optimize_latent: true,
        }
    }

    /// Deep-decoder generator with uniform stage width.
    pub fn underparam(out_len: Vec<usize>, out_channels: usize, depth: usize, hidden: usize) -> Self {
        let scale = 1usize << depth;
        Self {
            dims: out_len.len(),
            kind: NetworkKind::Underparam,
            depth,
            hidden_channels: vec![hidden; depth],
            skip_channels: 0,
            kernel: 1,
            out_channels,
            latent_extents: out_len.iter().map(|&n| (n / scale).max(1)).collect(),
            out_len,
            out_activation: Activation::Identity,
            latent_channels: hidden,
            optimize_latent: true,
        }
    }

    pub fn with_activation(mut self, act: Activation) -> Self {
        self.out_activation = act;
        self
    }

    pub fn with_optimize_latent(mut self, on: bool) -> Self {
        self.optimize_latent = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(1..=3).contains(&self.dims) || self.out_len.len() != self.dims {
            return bad(format!("generator dims {} with out_len {:?}", self.dims, self.out_len));
        }
        if self.out_channels == 0 || self.latent_channels == 0 {
            return bad("generator needs at least one output and latent channel".into());
        }
        if self.hidden_channels.len() != self.depth || self.hidden_channels.contains(&0) {
            return bad(format!(
                "hidden_channels {:?} must list {} positive widths",
                self.hidden_channels, self.depth
            ));
        }
        if self.latent_extents.len() != self.dims {
            return bad(format!("latent extents {:?}", self.latent_extents));
        }
        let scale = 1usize << self.depth;
        match self.kind {
            NetworkKind::Overparam => {
                if self.out_len.iter().any(|&n| n % scale != 0) {
                    return bad(format!(
                        "out_len {:?} not divisible by 2^{} for an encoder-decoder",
                        self.out_len, self.depth
                    ));
                }
                if self.latent_extents != self.out_len {
                    return bad("encoder-decoder latent must match out_len".into());
                }
                if self.kernel % 2 == 0 {
                    return bad(format!("kernel {} must be odd", self.kernel));
                }
            }
            NetworkKind::Underparam => {
                let reach: Vec<usize> = self.latent_extents.iter().map(|&n| n * scale).collect();
                if reach != self.out_len {
                    return bad(format!(
                        "latent {:?} upsampled {}x does not reach out_len {:?}",
                        self.latent_extents, scale, self.out_len
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parameter shapes in the order [`FactorNetwork::forward`] consumes them.
    fn plan(&self) -> Vec<(String, Vec<usize>, Init)> {
        let mut plan = Vec::new();
        let conv = |plan: &mut Vec<_>, name: String, cout: usize, cin: usize, k: usize, d: usize| {
            let mut shape = vec![cout, cin];
            shape.extend(std::iter::repeat_n(k, d));
            let fan_in = cin * k.pow(d as u32);
            plan.push((name, shape, Init::Uniform(1.0 / (fan_in as f64).sqrt())));
        };
        let norm = |plan: &mut Vec<_>, name: String, c: usize| {
            plan.push((format!("{name}.gain"), vec![c], Init::Const(1.0)));
            plan.push((format!("{name}.bias"), vec![c], Init::Const(0.0)));
        };
        let d = self.dims;
        let mut cin = self.latent_channels;
        match self.kind {
            NetworkKind::Overparam => {
                let s = self.skip_channels;
                for (i, &h) in self.hidden_channels.iter().enumerate() {
                    if s > 0 {
                        conv(&mut plan, format!("enc{i}.skip"), s, cin, 1, d);
                        norm(&mut plan, format!("enc{i}.skip_norm"), s);
                    }
                    conv(&mut plan, format!("enc{i}.down"), h, cin, self.kernel, d);
                    norm(&mut plan, format!("enc{i}.down_norm"), h);
                    conv(&mut plan, format!("enc{i}.conv"), h, h, self.kernel, d);
                    norm(&mut plan, format!("enc{i}.conv_norm"), h);
                    cin = h;
                }
                for i in (0..self.depth).rev() {
                    let h = self.hidden_channels[i];
                    conv(&mut plan, format!("dec{i}.conv"), h, cin + s, self.kernel, d);
                    norm(&mut plan, format!("dec{i}.conv_norm"), h);
                    conv(&mut plan, format!("dec{i}.mix"), h, h, 1, d);
                    norm(&mut plan, format!("dec{i}.mix_norm"), h);
                    cin = h;
                }
            }
            NetworkKind::Underparam => {
                for (i, &h) in self.hidden_channels.iter().enumerate() {
                    conv(&mut plan, format!("stage{i}.conv"), h, cin, 1, d);
                    norm(&mut plan, format!("stage{i}.norm"), h);
                    cin = h;
                }
            }
        }
        conv(&mut plan, "out.conv".into(), self.out_channels, cin, 1, d);
        plan.push(("out.bias".into(), vec![self.out_channels], Init::Const(0.0)));
        plan
    }

    /// Number of network weights (latent excluded).
    pub fn parameter_count(&self) -> usize {
        self.plan().iter().map(|(_, s, _)| numel(s)).sum()
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * numel(&self.out_len)
    }
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Uniform(f64),
    Const(f64),
}

/// Latent input with iid `U[0, 0.1]` entries.
pub fn sample_latent(extents: &[usize], channels: usize, seed: u64) -> Result<DenseTensor> {
    sample_latent_lane(extents, channels, seed, 0)
}

pub(crate) fn sample_latent_lane(
    extents: &[usize],
    channels: usize,
    seed: u64,
    lane: u64,
) -> Result<DenseTensor> {
    if extents.is_empty() || extents.contains(&0) || channels == 0 {
        return Err(Error::InvalidArgument(format!(
            "latent extents {extents:?} x {channels} channels"
        )));
    }
    let mut shape = vec![channels];
    shape.extend_from_slice(extents);
    let mut rng = rng::stream(seed, Stream::Latent, lane);
    let data = (0..numel(&shape)).map(|_| 0.1 * rng.random::<f64>()).collect();
    Ok(DenseTensor::from_parts(shape, data))
}

/// A generator's weights and latent input.
#[derive(Clone, Debug)]
pub struct FactorNetwork {
    spec: NetworkSpec,
    params: Vec<DenseTensor>,
    names: Vec<String>,
    latent: DenseTensor,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct NetworkBinding {
    pub params: Vec<Var>,
    pub latent: Var,
    pub output: Var,
}

impl NetworkBinding {
    /// Handles in the same order as [`FactorNetwork::trainables_mut`].
    pub fn trainable_vars(&self, optimize_latent: bool) -> Vec<Var> {
        let mut v = self.params.clone();
        if optimize_latent {
            v.push(self.latent);
        }
        v
    }
}

/// Builds a generator with seeded weights and latent. `lane` distinguishes
/// the networks of one decomposition that share a seed.
pub fn build_factor_network(spec: NetworkSpec, seed: u64) -> Result<FactorNetwork> {
    FactorNetwork::build(spec, seed, 0)
}

impl FactorNetwork {
    pub fn build(spec: NetworkSpec, seed: u64, lane: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::stream(seed, Stream::Init, lane);
        let mut params = Vec::new();
        let mut names = Vec::new();
        for (name, shape, init) in spec.plan() {
            let data = match init {
                Init::Uniform(b) => (0..numel(&shape))
                    .map(|_| rng.random_range(-b..=b))
                    .collect(),
                Init::Const(c) => vec![c; numel(&shape)],
            };
            params.push(DenseTensor::from_parts(shape, data));
            names.push(name);
        }
        let latent = sample_latent_lane(&spec.latent_extents, spec.latent_channels, seed, lane)?;
        Ok(Self {
            spec,
            params,
            names,
            latent,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(DenseTensor::len).sum()
    }

    pub fn latent(&self) -> &DenseTensor {
        &self.latent
    }

    /// Replaces the latent input (shape must match).
    pub fn set_latent(&mut self, latent: DenseTensor) -> Result<()> {
        self.latent.check_same_shape(&latent)?;
        self.latent = latent;
        Ok(())
    }

    pub fn params(&self) -> &[DenseTensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [DenseTensor] {
        &mut self.params
    }

    /// Names of the trainable tensors, in [`Self::trainables`] order.
    pub fn trainable_names(&self) -> Vec<String> {
        let mut n = self.names.clone();
        if self.spec.optimize_latent {
            n.push("latent".into());
        }
        n
    }

    /// Weights, then the latent when it is optimized.
    pub fn trainables(&self) -> Vec<DenseTensor> {
        let mut v = self.params.clone();
        if self.spec.optimize_latent {
            v.push(self.latent.clone());
        }
        v
    }

    /// Writes back tensors laid out as in [`Self::trainables`].
    pub fn set_trainables(&mut self, mut values: Vec<DenseTensor>) {
        if self.spec.optimize_latent {
            self.latent = values.pop().expect("latent slot");
        }
        debug_assert_eq!(values.len(), self.params.len());
        self.params = values;
    }

    /// Records the generator on `tape`; output is `[out_channels, out_len..]`.
    pub fn forward(&self, tape: &mut Tape) -> Result<NetworkBinding> {
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.clone(), true))
            .collect();
        let latent = tape.leaf(self.latent.clone(), self.spec.optimize_latent);
        let output = self.forward_with(tape, &params, latent)?;
        Ok(NetworkBinding {
            params,
            latent,
            output,
        })
    }

    /// Output without gradient tracking.
    pub fn output(&self) -> Result<DenseTensor> {
        let mut tape = Tape::new();
        let b = self.forward(&mut tape)?;
        Ok(tape.value(b.output).clone())
    }

    fn forward_with(&self, tape: &mut Tape, params: &[Var], latent: Var) -> Result<Var> {
        let spec = &self.spec;
        let d = spec.dims;
        let mut cursor = params.iter().copied();
        let mut next = || cursor.next().expect("parameter plan exhausted");
        let mut cur = latent;
        let mut cin = spec.latent_channels;

        // conv → norm → activation, consuming weight, gain and bias.
        let block = |tape: &mut Tape,
                     x: Var,
                     w: Var,
                     g: Var,
                     b: Var,
                     conv: &ConvSpec,
                     act: Activation|
         -> Result<Var> {
            let y = tape.convolve_nd(x, w, conv)?;
            let y = tape.normalize_channels(y, g, b, NORM_EPS)?;
            Ok(tape.activation(y, act))
        };

        match spec.kind {
            NetworkKind::Overparam => {
                let s = spec.skip_channels;
                let mut skips = Vec::with_capacity(spec.depth);
                for &h in &spec.hidden_channels {
                    if s > 0 {
                        let (w, g, b) = (next(), next(), next());
                        let c = ConvSpec::same(d, 1, 1, cin, s);
                        skips.push(Some(block(tape, cur, w, g, b, &c, HIDDEN_ACTIVATION)?));
                    } else {
                        skips.push(None);
                    }
                    let (w, g, b) = (next(), next(), next());
                    let c = ConvSpec::same(d, spec.kernel, 2, cin, h);
                    cur = block(tape, cur, w, g, b, &c, HIDDEN_ACTIVATION)?;
                    let (w, g, b) = (next(), next(), next());
                    let c = ConvSpec::same(d, spec.kernel, 1, h, h);
                    cur = block(tape, cur, w, g, b, &c, HIDDEN_ACTIVATION)?;
                    cin = h;
                }
                for i in (0..spec.depth).rev() {
                    let h = spec.hidden_channels[i];
                    cur = tape.upsample_nd(cur, &vec![2; d], UpsampleMode::Linear)?;
                    if let Some(skip) = skips[i] {
                        cur = tape.concat(&[skip, cur])?;
                    }
                    let (w, g, b) = (next(), next(), next());
                    let c = ConvSpec::same(d, spec.kernel, 1, cin + s, h);
                    cur = block(tape, cur, w, g, b, &c, HIDDEN_ACTIVATION)?;
                    let (w, g, b) = (next(), next(), next());
                    let c = ConvSpec::same(d, 1, 1, h, h);
                    cur = block(tape, cur, w, g, b, &c, HIDDEN_ACTIVATION)?;
                    cin = h;
                }
            }
            NetworkKind::Underparam => {
                for &h in &spec.hidden_channels {
                    let w = next();
                    cur = tape.convolve_nd(cur, w, &ConvSpec::same(d, 1, 1, cin, h))?;
                    cur = tape.upsample_nd(cur, &vec![2; d], UpsampleMode::Linear)?;
                    cur = tape.activation(cur, Activation::Relu);
                    let (g, b) = (next(), next());
                    cur = tape.normalize_channels(cur, g, b, NORM_EPS)?;
                    cin = h;
                }
            }
        }
        let w = next();
        cur = tape.convolve_nd(cur, w, &ConvSpec::same(d, 1, 1, cin, spec.out_channels))?;
        let b = next();
        cur = tape.add_channel_bias(cur, b)?;
        Ok(tape.activation(cur, spec.out_activation))
    }
}

/// Generator output `[R, N]` as the `N × R` factor matrix.
pub fn as_factor_matrix(tape: &mut Tape, output: Var) -> Result<Var> {
    tape.transpose(output)
}
