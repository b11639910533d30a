//! Fully connected feedforward networks `C_K ∘ σ ∘ C_{K-1} ∘ … ∘ σ ∘ C_1` with a scalar
//! output, optional batch normalization on hidden layers, and exact reverse-mode gradients.
//!
//! Parameters live in one flat vector, layer by layer: `W_k` (row-major, `d_{k+1} × d_k`),
//! then `b_k`, then the batch-norm scale and shift of hidden layers when enabled.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Variance floor inside batch normalization.
pub const BATCH_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the input `x` and output `y = σ(x)`.
    /// The ReLU subgradient at 0 is 0.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    /// Number of hidden layers, `K - 1`.
    pub hidden_layers: usize,
    /// Neurons per hidden layer.
    pub width: usize,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!(
                "network needs positive input dim, hidden layers and width: {self:?}"
            )));
        }
        Ok(())
    }

    /// `d_1, …, d_{K+1}` with `d_1 = input_dim` and `d_{K+1} = 1`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 2);
        dims.push(self.input_dim);
        dims.extend(std::iter::repeat_n(self.width, self.hidden_layers));
        dims.push(1);
        dims
    }

    /// `M = Σ_k (d_k + 1) d_{k+1}` plus scale and shift per batch-normalized layer.
    pub fn param_count(&self) -> usize {
        let dims = self.layer_dims();
        let affine: usize = dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
        let bn = if self.batch_norm {
            2 * self.width * self.hidden_layers
        } else {
            0
        };
        affine + bn
    }

    fn slots(&self) -> Vec<LayerSlots> {
        let dims = self.layer_dims();
        let mut offset = 0;
        let mut take = |len: usize| {
            let r = offset..offset + len;
            offset += len;
            r
        };
        dims.windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = take(fan_in * fan_out);
                let bias = take(fan_out);
                let hidden = k < self.hidden_layers;
                let (scale, shift) = if hidden && self.batch_norm {
                    (Some(take(fan_out)), Some(take(fan_out)))
                } else {
                    (None, None)
                };
                LayerSlots {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                    scale,
                    shift,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerSlots {
    fan_in: usize,
    fan_out: usize,
    weights: Range<usize>,
    bias: Range<usize>,
    scale: Option<Range<usize>>,
    shift: Option<Range<usize>>,
}

/// Per-neuron batch mean and (biased) variance of a hidden layer's pre-activations.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch normalization uses the statistics of the current batch.
    Train,
    /// Batch normalization uses the recorded statistics.
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetworkConfig,
    slots: Vec<LayerSlots>,
    values: Vec<f64>,
    stats: Vec<BatchStats>,
}

struct LayerTape {
    /// Batch-normalized `x̂`, when enabled.
    normalized: Option<Vec<f64>>,
    inv_std: Option<Vec<f64>>,
    /// Input to the activation (`z`, or `γ x̂ + β` under batch norm).
    act_in: Vec<f64>,
    /// Activation output, `batch × fan_out`; the affine output `W a + b` for the last layer.
    out: Vec<f64>,
}

/// Intermediate values of one forward pass, consumed by [`NetworkParams::backward`].
pub struct ForwardTape {
    fingerprint: u64,
    batch: usize,
    mode: Mode,
    inputs: Vec<f64>,
    layers: Vec<LayerTape>,
    stats: Vec<BatchStats>,
}

impl ForwardTape {
    pub fn outputs(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").out
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Batch statistics computed in training mode (empty otherwise).
    pub fn batch_stats(&self) -> &[BatchStats] {
        &self.stats
    }
}

impl NetworkParams {
    /// All-zero parameters with identity batch statistics.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let slots = config.slots();
        let mut values = vec![0.0; config.param_count()];
        for s in &slots {
            if let Some(scale) = &s.scale {
                values[scale.clone()].fill(1.0);
            }
        }
        let stats = if config.batch_norm {
            (0..config.hidden_layers)
                .map(|_| BatchStats {
                    mean: vec![0.0; config.width],
                    var: vec![1.0; config.width],
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            config,
            slots,
            values,
            stats,
        })
    }

    /// Xavier-uniform weights `U[-√(6/(d_k + d_{k+1})), +√(6/(d_k + d_{k+1}))]`, zero biases,
    /// unit batch-norm scale and zero shift.
    pub fn init_xavier(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = SplitMix64::new(seed);
        for s in &p.slots {
            let bound = (6.0 / (s.fan_in + s.fan_out) as f64).sqrt();
            for w in &mut p.values[s.weights.clone()] {
                *w = rng.uniform(-bound, bound);
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn batch_stats(&self) -> &[BatchStats] {
        &self.stats
    }

    pub fn layer_count(&self) -> usize {
        self.slots.len()
    }

    /// Weight matrix of layer `k` (0-based), row-major `fan_out × fan_in`.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.values[self.slots[k].weights.clone()]
    }

    pub fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.slots[k].weights.clone();
        &mut self.values[r]
    }

    pub fn bias(&self, k: usize) -> &[f64] {
        &self.values[self.slots[k].bias.clone()]
    }

    pub fn bias_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.slots[k].bias.clone();
        &mut self.values[r]
    }

    /// Flat indices of all weight-matrix entries (the penalized subset `θ_W`).
    pub fn weight_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.slots.iter().map(|s| s.weights.clone())
    }

    /// `Σ w²` over weight matrices only.
    pub fn weight_norm_sq(&self) -> f64 {
        self.weight_ranges()
            .map(|r| self.values[r].iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    /// Replaces the stored inference statistics with those of a training-mode pass.
    pub fn record_statistics(&mut self, tape: &ForwardTape) {
        if tape.mode == Mode::Train && self.config.batch_norm {
            self.stats = tape.stats.clone();
        }
    }

    fn fingerprint(&self) -> u64 {
        // FNV-1a over the parameter bit patterns.
        self.values.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// Forward pass over a row-major batch of `batch × input_dim` values.
    pub fn forward(&self, inputs: &[f64], mode: Mode) -> Result<ForwardTape> {
        let d = self.config.input_dim;
        if inputs.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: inputs.len() % d,
            });
        }
        let batch = inputs.len() / d;
        let train_bn = self.config.batch_norm && mode == Mode::Train;
        if train_bn && batch < 2 {
            return Err(Error::InvalidArgument(
                "batch normalization in training mode needs at least 2 samples".into(),
            ));
        }

        let mut layers: Vec<LayerTape> = Vec::with_capacity(self.slots.len());
        let mut stats = Vec::new();
        for (k, s) in self.slots.iter().enumerate() {
            let input: &[f64] = if k == 0 { inputs } else { &layers[k - 1].out };
            let w = &self.values[s.weights.clone()];
            let b = &self.values[s.bias.clone()];
            let mut pre = vec![0.0; batch * s.fan_out];
            for (row, z) in input.chunks_exact(s.fan_in).zip(pre.chunks_exact_mut(s.fan_out)) {
                for (o, zo) in z.iter_mut().enumerate() {
                    let wr = &w[o * s.fan_in..(o + 1) * s.fan_in];
                    *zo = b[o] + wr.iter().zip(row).map(|(a, x)| a * x).sum::<f64>();
                }
            }

            let is_output = k + 1 == self.slots.len();
            if is_output {
                layers.push(LayerTape {
                    act_in: Vec::new(),
                    normalized: None,
                    inv_std: None,
                    out: pre,
                });
                continue;
            }

            let (act_in, normalized, inv_std) = match (&s.scale, &s.shift) {
                (Some(scale), Some(shift)) => {
                    let gamma = &self.values[scale.clone()];
                    let beta = &self.values[shift.clone()];
                    let st = if train_bn {
                        let st = batch_statistics(&pre, s.fan_out);
                        stats.push(st.clone());
                        st
                    } else {
                        self.stats[k].clone()
                    };
                    let inv: Vec<f64> = st
                        .var
                        .iter()
                        .map(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt())
                        .collect();
                    let mut xhat = pre;
                    let mut u = vec![0.0; xhat.len()];
                    for (xr, ur) in xhat.chunks_exact_mut(s.fan_out).zip(u.chunks_exact_mut(s.fan_out)) {
                        for o in 0..s.fan_out {
                            xr[o] = (xr[o] - st.mean[o]) * inv[o];
                            ur[o] = gamma[o] * xr[o] + beta[o];
                        }
                    }
                    (u, Some(xhat), Some(inv))
                }
                _ => (pre, None, None),
            };
            let act = self.config.activation;
            let out = act_in.iter().map(|&x| act.apply(x)).collect();
            layers.push(LayerTape {
                normalized,
                inv_std,
                act_in,
                out,
            });
        }

        Ok(ForwardTape {
            fingerprint: self.fingerprint(),
            batch,
            mode,
            inputs: inputs.to_vec(),
            layers,
            stats,
        })
    }

    /// Network outputs in inference mode.
    pub fn predict(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let tape = self.forward(inputs, Mode::Inference)?;
        Ok(tape.layers.last().map(|l| l.out.clone()).unwrap_or_default())
    }

    /// Gradient of `Σ_s upstream[s] · L_θ(y_s)` with respect to every parameter, in the
    /// flat parameter layout. In training mode the batch-statistics pathway is included.
    pub fn backward(&self, tape: &ForwardTape, upstream: &[f64]) -> Result<Vec<f64>> {
        if tape.fingerprint != self.fingerprint()
            || upstream.len() != tape.batch
            || tape.layers.len() != self.slots.len()
        {
            return Err(Error::StaleForwardState);
        }
        let batch = tape.batch;
        let mut grad = vec![0.0; self.values.len()];
        // Gradient with respect to the current layer's affine output `z`.
        let mut dz = upstream.to_vec();

        for k in (0..self.slots.len()).rev() {
            let s = &self.slots[k];
            let input: &[f64] = if k == 0 {
                &tape.inputs
            } else {
                &tape.layers[k - 1].out
            };
            let w = &self.values[s.weights.clone()];

            {
                let gw_start = s.weights.start;
                let gb_start = s.bias.start;
                for (row, dzr) in input.chunks_exact(s.fan_in).zip(dz.chunks_exact(s.fan_out)) {
                    for (o, &g) in dzr.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        grad[gb_start + o] += g;
                        let gw = &mut grad[gw_start + o * s.fan_in..gw_start + (o + 1) * s.fan_in];
                        for (gwi, x) in gw.iter_mut().zip(row) {
                            *gwi += g * x;
                        }
                    }
                }
            }
            if k == 0 {
                break;
            }

            // Back through W into the previous layer's activation output.
            let prev_slots = &self.slots[k - 1];
            let prev = &tape.layers[k - 1];
            let width = prev_slots.fan_out;
            let mut du = vec![0.0; batch * width];
            for ((dzr, dur), (xr, yr)) in dz
                .chunks_exact(s.fan_out)
                .zip(du.chunks_exact_mut(width))
                .zip(prev.act_in.chunks_exact(width).zip(prev.out.chunks_exact(width)))
            {
                for (o, &g) in dzr.iter().enumerate() {
                    let wr = &w[o * s.fan_in..(o + 1) * s.fan_in];
                    for (d, wv) in dur.iter_mut().zip(wr) {
                        *d += g * wv;
                    }
                }
                let act = self.config.activation;
                for i in 0..width {
                    dur[i] *= act.derivative(xr[i], yr[i]);
                }
            }

            dz = match (&prev_slots.scale, &prev_slots.shift, &prev.normalized, &prev.inv_std) {
                (Some(scale), Some(shift), Some(xhat), Some(inv)) => {
                    let gamma = &self.values[scale.clone()];
                    let mut dgamma = vec![0.0; width];
                    let mut dbeta = vec![0.0; width];
                    for (dur, xr) in du.chunks_exact(width).zip(xhat.chunks_exact(width)) {
                        for i in 0..width {
                            dgamma[i] += dur[i] * xr[i];
                            dbeta[i] += dur[i];
                        }
                    }
                    for i in 0..width {
                        grad[scale.start + i] += dgamma[i];
                        grad[shift.start + i] += dbeta[i];
                    }
                    let mut dzp = vec![0.0; batch * width];
                    if tape.mode == Mode::Train {
                        // dx̂ = γ du; dz = inv/n · (n dx̂ − Σ dx̂ − x̂ Σ dx̂ x̂).
                        // With dx̂ = γ du: Σ dx̂ = γ dβ and Σ dx̂ x̂ = γ dγ.
                        let n = batch as f64;
                        for ((dzr, dur), xr) in dzp
                            .chunks_exact_mut(width)
                            .zip(du.chunks_exact(width))
                            .zip(xhat.chunks_exact(width))
                        {
                            for i in 0..width {
                                dzr[i] = gamma[i] * inv[i] / n
                                    * (n * dur[i] - dbeta[i] - xr[i] * dgamma[i]);
                            }
                        }
                    } else {
                        for (dzr, dur) in dzp.chunks_exact_mut(width).zip(du.chunks_exact(width)) {
                            for i in 0..width {
                                dzr[i] = gamma[i] * inv[i] * dur[i];
                            }
                        }
                    }
                    dzp
                }
                _ => du,
            };
        }
        Ok(grad)
    }

    /// Writes the model in the versioned little-endian binary format (see [`MODEL_MAGIC`]).
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let c = &self.config;
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        for v in [c.input_dim, c.hidden_layers, c.width] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        out.write_all(&[c.activation.code(), c.batch_norm as u8, 0, 0])?;
        let stat_count: usize = self.stats.iter().map(|s| s.mean.len() * 2).sum();
        out.write_all(&(self.values.len() as u64).to_le_bytes())?;
        out.write_all(&(stat_count as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        for s in &self.stats {
            for v in s.mean.iter().chain(&s.var) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        let mut buf = Vec::new();
        input
            .read_to_end(&mut buf)
            .map_err(|e| Error::io("<model>", e))?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(8).ok_or_else(|| bad("truncated header"))? != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let dims: Vec<usize> = (0..3)
            .map(|_| cur.u32().map(|v| v as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("truncated header"))?;
        let flags = cur.take(4).ok_or_else(|| bad("truncated header"))?;
        let activation = Activation::from_code(flags[0]).ok_or_else(|| bad("bad activation"))?;
        let config = NetworkConfig {
            input_dim: dims[0],
            hidden_layers: dims[1],
            width: dims[2],
            activation,
            batch_norm: flags[1] != 0,
        };
        let mut params = Self::zeros(config)?;
        let count = cur.u64().ok_or_else(|| bad("truncated header"))? as usize;
        let stat_count = cur.u64().ok_or_else(|| bad("truncated header"))? as usize;
        let expected_stats = if config.batch_norm {
            2 * config.width * config.hidden_layers
        } else {
            0
        };
        if count != params.values.len() || stat_count != expected_stats {
            return Err(bad("parameter count does not match the header config"));
        }
        for v in params.values.iter_mut() {
            *v = cur.f64().ok_or_else(|| bad("truncated parameters"))?;
        }
        for s in params.stats.iter_mut() {
            for v in s.mean.iter_mut().chain(s.var.iter_mut()) {
                *v = cur.f64().ok_or_else(|| bad("truncated statistics"))?;
            }
        }
        if cur.pos != buf.len() {
            return Err(bad("trailing bytes"));
        }
        if params.values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(params)
    }
}

/// File magic of serialized models. Layout after the magic, little-endian:
/// `u32 version`, `u32 input_dim`, `u32 hidden_layers`, `u32 width`,
/// `u8 activation (0 sigmoid, 1 tanh, 2 relu)`, `u8 batch_norm`, `u16 reserved`,
/// `u64 parameter count`, `u64 statistics count`, the parameters as `f64` in layer order,
/// then per batch-normalized layer its means followed by its variances.
pub const MODEL_MAGIC: &[u8; 8] = b"QMCNETMD";
pub const MODEL_VERSION: u32 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

fn batch_statistics(pre: &[f64], width: usize) -> BatchStats {
    let n = (pre.len() / width) as f64;
    let mut mean = vec![0.0; width];
    for row in pre.chunks_exact(width) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for row in pre.chunks_exact(width) {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    BatchStats { mean, var }
}
