//! The raw-waveform classifier: input normalization, a sinc or learned-taps
//! front-end, standard convolution blocks, fully connected blocks and a
//! softmax classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    leaky_relu, leaky_relu_backward, max_pool1d, max_pool1d_backward, BatchNorm, BatchStats,
    Conv1d, Dense, LayerNorm, NormCache,
};
use super::optim::RmsPropConfig;
use super::Tensor;
use crate::error::{Error, Result};
use crate::filter::{FilterBank, FilterSpec, WindowKind};
use crate::sinc::SincLayerParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontendKind {
    Sinc,
    Conv,
}

impl std::fmt::Display for FrontendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrontendKind::Sinc => "sinc",
            FrontendKind::Conv => "conv",
        })
    }
}

impl std::str::FromStr for FrontendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinc" => Ok(FrontendKind::Sinc),
            "conv" => Ok(FrontendKind::Conv),
            other => Err(Error::Config(format!(
                "frontend must be `sinc` or `conv`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub kind: FrontendKind,
    pub filters: usize,
    pub length: usize,
    /// Window of the sinc filters; ignored by the learned-taps front-end.
    pub window: WindowKind,
    pub pool: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            kind: FrontendKind::Sinc,
            filters: 80,
            length: 251,
            window: WindowKind::Hamming,
            pool: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockConfig {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub frontend: FrontendConfig,
    pub conv_blocks: Vec<ConvBlockConfig>,
    pub fc_layers: Vec<usize>,
    pub leaky_slope: f64,
    /// Inverted-dropout rate after each fully connected block.
    pub dropout: f64,
    pub batch_norm_momentum: f64,
    pub norm_eps: f64,
    /// Layer-normalize the raw input samples.
    pub input_norm: bool,
    pub optimizer: RmsPropConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            frontend: FrontendConfig::default(),
            conv_blocks: vec![
                ConvBlockConfig {
                    filters: 60,
                    kernel: 5,
                    pool: 3,
                };
                2
            ],
            fc_layers: vec![2048; 3],
            leaky_slope: 0.2,
            dropout: 0.0,
            batch_norm_momentum: 0.1,
            norm_eps: 1e-5,
            input_norm: true,
            optimizer: RmsPropConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn with_frontend(mut self, kind: FrontendKind) -> Self {
        self.frontend.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.frontend.filters == 0 {
            return fail("network.frontend.filters must be positive".into());
        }
        // Sinc filters need an integer center tap; learned taps do not.
        if self.frontend.length == 0 || (self.frontend.kind == FrontendKind::Sinc && self.frontend.length % 2 == 0) {
            return fail(format!(
                "network.frontend.length must be positive, and odd for the sinc front-end, got {}",
                self.frontend.length
            ));
        }
        if self.frontend.pool == 0 || self.conv_blocks.iter().any(|b| b.pool == 0) {
            return fail("pool widths must be at least 1".into());
        }
        if self.conv_blocks.iter().any(|b| b.filters == 0 || b.kernel == 0) {
            return fail("network.conv_blocks entries need positive filters and kernel".into());
        }
        if self.fc_layers.iter().any(|&d| d == 0) {
            return fail("network.fc_layers entries must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("network.dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.optimizer.lr > 0.0 && (0.0..1.0).contains(&self.optimizer.alpha)) {
            return fail("network.optimizer needs lr > 0 and alpha in [0, 1)".into());
        }
        Ok(())
    }
}

/// Input/output geometry of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_len: usize,
    pub n_classes: usize,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frontend {
    Sinc(SincLayerParams),
    /// Bias-free learned-taps convolution, `F x 1 x L`.
    Conv(Conv1d),
}

impl Frontend {
    pub fn kind(&self) -> FrontendKind {
        match self {
            Frontend::Sinc(_) => FrontendKind::Sinc,
            Frontend::Conv(_) => FrontendKind::Conv,
        }
    }

    /// Learnable parameters of the first layer: `2F` for sinc, `F * L` for conv.
    pub fn parameter_count(&self) -> usize {
        match self {
            Frontend::Sinc(p) => p.parameter_count(),
            Frontend::Conv(c) => c.parameter_count(),
        }
    }

    pub fn num_filters(&self) -> usize {
        match self {
            Frontend::Sinc(p) => p.num_filters(),
            Frontend::Conv(c) => c.out_channels(),
        }
    }

    /// The bank of impulse responses the front-end currently applies.
    pub fn filter_bank(&self) -> Result<FilterBank> {
        match self {
            Frontend::Sinc(p) => p.materialize(),
            Frontend::Conv(c) => FilterBank::from_taps(c.kernel(), c.weight.data().to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvBlock {
    conv: Conv1d,
    pool: usize,
    norm: LayerNorm,
}

#[derive(Debug, Clone, PartialEq)]
struct DenseBlock {
    dense: Dense,
    norm: BatchNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout masks drawn from the given seed.
    Train { dropout_seed: u64 },
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone)]
struct ConvStageCache {
    input: Tensor,
    pre_pool_shape: Vec<usize>,
    argmax: Vec<usize>,
    norm: NormCache,
    normed: Tensor,
    output: Tensor,
}

#[derive(Debug, Clone)]
struct DenseStageCache {
    input: Tensor,
    norm: NormCache,
    normed: Tensor,
    activated: Tensor,
    mask: Option<Vec<f64>>,
    output: Tensor,
    stats: Option<BatchStats>,
}

/// Everything a backward pass needs, plus the logits.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Tensor,
    input: Tensor,
    input_norm: Option<NormCache>,
    conv: Vec<ConvStageCache>,
    dense: Vec<DenseStageCache>,
}

impl ForwardPass {
    /// Post-activation output of the last fully connected block (before
    /// dropout), or the flattened convolution output if there is none.
    pub fn last_hidden(&self) -> Tensor {
        match self.dense.last() {
            Some(d) => d.activated.clone(),
            None => {
                let out = &self.conv.last().expect("front-end stage").output;
                let batch = out.dim(0);
                out.clone()
                    .reshape(&[batch, out.len() / batch])
                    .expect("flatten")
            }
        }
    }

    /// Named intermediate tensors in network order.
    pub fn activations(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("input".to_string(), &self.input)];
        for (i, c) in self.conv.iter().enumerate() {
            let name = if i == 0 { "frontend".to_string() } else { format!("conv{i}") };
            out.push((format!("{name}.normalized"), &c.normed));
            out.push((format!("{name}.output"), &c.output));
        }
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("fc{i}.normalized"), &d.normed));
            out.push((format!("fc{i}.output"), &d.output));
        }
        out.push(("logits".to_string(), &self.logits));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: NetworkConfig,
    shape: ModelShape,
    input_norm: Option<LayerNorm>,
    frontend: Frontend,
    frontend_norm: LayerNorm,
    blocks: Vec<ConvBlock>,
    dense: Vec<DenseBlock>,
    classifier: Dense,
}

impl Model {
    /// Mel-initialized sinc front-end or Glorot-initialized taps; Glorot for
    /// every other weight, zeros for biases, unit gains.
    pub fn new(config: &NetworkConfig, shape: ModelShape, seed: u64) -> Result<Self> {
        config.validate()?;
        if shape.n_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                shape.n_classes
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = config.norm_eps;
        let fc = &config.frontend;
        if shape.input_len < fc.length {
            return Err(Error::Config(format!(
                "input of {} samples is shorter than the {}-tap front-end",
                shape.input_len, fc.length
            )));
        }
        let input_norm = if config.input_norm {
            Some(LayerNorm::new(&[1, shape.input_len], eps)?)
        } else {
            None
        };
        let frontend = match fc.kind {
            FrontendKind::Sinc => {
                let spec = FilterSpec::new(fc.length, fc.window, shape.sample_rate)?;
                Frontend::Sinc(SincLayerParams::mel(fc.filters, spec)?)
            }
            FrontendKind::Conv => Frontend::Conv(Conv1d::glorot(1, fc.filters, fc.length, false, &mut rng)),
        };
        let pooled = |t: usize, pool: usize, what: &str| -> Result<usize> {
            let out = t / pool;
            if out == 0 {
                return Err(Error::Config(format!("{what}: sequence collapses to zero length")));
            }
            Ok(out)
        };
        let mut channels = fc.filters;
        let mut t = pooled(shape.input_len - fc.length + 1, fc.pool, "frontend")?;
        let frontend_norm = LayerNorm::new(&[channels, t], eps)?;
        let mut blocks = Vec::new();
        for (i, b) in config.conv_blocks.iter().enumerate() {
            if t < b.kernel {
                return Err(Error::Config(format!(
                    "conv block {i}: kernel {} exceeds sequence length {t}",
                    b.kernel
                )));
            }
            let conv = Conv1d::glorot(channels, b.filters, b.kernel, true, &mut rng);
            t = pooled(t - b.kernel + 1, b.pool, &format!("conv block {i}"))?;
            channels = b.filters;
            blocks.push(ConvBlock {
                conv,
                pool: b.pool,
                norm: LayerNorm::new(&[channels, t], eps)?,
            });
        }
        let mut width = channels * t;
        let mut dense = Vec::new();
        for &d in &config.fc_layers {
            dense.push(DenseBlock {
                dense: Dense::glorot(width, d, &mut rng),
                norm: BatchNorm::new(d, config.batch_norm_momentum, eps),
            });
            width = d;
        }
        let classifier = Dense::glorot(width, shape.n_classes, &mut rng);
        Ok(Self {
            config: config.clone(),
            shape,
            input_norm,
            frontend,
            frontend_norm,
            blocks,
            dense,
            classifier,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn frontend(&self) -> &Frontend {
        &self.frontend
    }

    pub fn first_layer_parameter_count(&self) -> usize {
        self.frontend.parameter_count()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    /// Width of the vector returned by [`ForwardPass::last_hidden`].
    pub fn hidden_width(&self) -> usize {
        match self.dense.last() {
            Some(d) => d.dense.out_features(),
            None => self.classifier.in_features(),
        }
    }

    /// Learnable tensors in a fixed order, with stable names.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        if let Some(n) = &self.input_norm {
            out.push(("input_norm.gain".into(), &n.gain));
            out.push(("input_norm.bias".into(), &n.bias));
        }
        match &self.frontend {
            Frontend::Sinc(p) => out.push(("frontend.cutoffs".into(), p.cutoffs())),
            Frontend::Conv(c) => out.push(("frontend.weight".into(), &c.weight)),
        }
        out.push(("frontend_norm.gain".into(), &self.frontend_norm.gain));
        out.push(("frontend_norm.bias".into(), &self.frontend_norm.bias));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), &b.conv.weight));
            out.push((format!("conv{}.bias", i + 1), b.conv.bias.as_ref().expect("block bias")));
            out.push((format!("conv{}.norm.gain", i + 1), &b.norm.gain));
            out.push((format!("conv{}.norm.bias", i + 1), &b.norm.bias));
        }
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("fc{i}.weight"), &d.dense.weight));
            out.push((format!("fc{i}.bias"), &d.dense.bias));
            out.push((format!("fc{i}.bn.gamma"), &d.norm.gamma));
            out.push((format!("fc{i}.bn.beta"), &d.norm.beta));
        }
        out.push(("classifier.weight".into(), &self.classifier.weight));
        out.push(("classifier.bias".into(), &self.classifier.bias));
        out
    }

    /// Same order as [`parameters`](Self::parameters).
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        if let Some(n) = &mut self.input_norm {
            out.push(&mut n.gain);
            out.push(&mut n.bias);
        }
        match &mut self.frontend {
            Frontend::Sinc(p) => out.push(p.cutoffs_mut()),
            Frontend::Conv(c) => out.push(&mut c.weight),
        }
        out.push(&mut self.frontend_norm.gain);
        out.push(&mut self.frontend_norm.bias);
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight);
            out.push(b.conv.bias.as_mut().expect("block bias"));
            out.push(&mut b.norm.gain);
            out.push(&mut b.norm.bias);
        }
        for d in &mut self.dense {
            out.push(&mut d.dense.weight);
            out.push(&mut d.dense.bias);
            out.push(&mut d.norm.gamma);
            out.push(&mut d.norm.beta);
        }
        out.push(&mut self.classifier.weight);
        out.push(&mut self.classifier.bias);
        out
    }

    /// Non-learned state (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("fc{i}.bn.running_mean"), &d.norm.running_mean));
            out.push((format!("fc{i}.bn.running_var"), &d.norm.running_var));
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for d in &mut self.dense {
            out.push(&mut d.norm.running_mean);
            out.push(&mut d.norm.running_var);
        }
        out
    }

    fn run_conv_stage(
        &self,
        input: Tensor,
        stage: usize,
        slope: f64,
    ) -> Result<ConvStageCache> {
        let (z, pool, norm) = if stage == 0 {
            let z = match &self.frontend {
                Frontend::Sinc(p) => p.forward(&input)?,
                Frontend::Conv(c) => c.forward(&input)?,
            };
            (z, self.config.frontend.pool, &self.frontend_norm)
        } else {
            let b = &self.blocks[stage - 1];
            (b.conv.forward(&input)?, b.pool, &b.norm)
        };
        let pre_pool_shape = z.shape().to_vec();
        let pooled = max_pool1d(&z, pool)?;
        drop(z);
        let (normed, norm_cache) = norm.forward(&pooled.output)?;
        let output = leaky_relu(&normed, slope);
        Ok(ConvStageCache {
            input,
            pre_pool_shape,
            argmax: pooled.argmax,
            norm: norm_cache,
            normed,
            output,
        })
    }

    /// Runs the network on a `B x 1 x T` batch of chunks.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<ForwardPass> {
        x.expect_shape(&[x.dim(0), 1, self.shape.input_len], "model input")?;
        let slope = self.config.leaky_slope;
        let (first_input, input_norm) = match &self.input_norm {
            Some(n) => {
                let (y, c) = n.forward(x)?;
                (y, Some(c))
            }
            None => (x.clone(), None),
        };
        let mut conv = Vec::with_capacity(self.blocks.len() + 1);
        let mut current = first_input;
        for stage in 0..=self.blocks.len() {
            let cache = self.run_conv_stage(current, stage, slope)?;
            current = cache.output.clone();
            conv.push(cache);
        }
        let batch = x.dim(0);
        let flat_len = current.len() / batch;
        let mut h = current.reshape(&[batch, flat_len])?;
        let training = matches!(mode, Mode::Train { .. });
        let mut rng = match mode {
            Mode::Train { dropout_seed } => Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
            Mode::Eval => None,
        };
        let mut dense = Vec::with_capacity(self.dense.len());
        for block in &self.dense {
            let z = block.dense.forward(&h)?;
            let (normed, norm_cache, stats) = block.norm.forward(&z, training)?;
            let activated = leaky_relu(&normed, slope);
            let p = self.config.dropout;
            let (output, mask) = match rng.as_mut() {
                Some(rng) if p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..activated.len())
                        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                        .collect();
                    let data = activated.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
                    (Tensor::new(activated.shape().to_vec(), data)?, Some(mask))
                }
                _ => (activated.clone(), None),
            };
            let input = std::mem::replace(&mut h, output.clone());
            dense.push(DenseStageCache {
                input,
                norm: norm_cache,
                normed,
                activated,
                mask,
                output,
                stats,
            });
        }
        let logits = self.classifier.forward(&h)?;
        Ok(ForwardPass {
            logits,
            input: x.clone(),
            input_norm,
            conv,
            dense,
        })
    }

    /// Folds the batch statistics of a training-mode pass into the running averages.
    pub fn commit_batch_stats(&mut self, pass: &ForwardPass) {
        for (block, cache) in self.dense.iter_mut().zip(&pass.dense) {
            if let Some(stats) = &cache.stats {
                block.norm.update_running(stats);
            }
        }
    }

    /// Gradients of the loss w.r.t. every parameter, in [`parameters`](Self::parameters) order.
    pub fn backward(&self, pass: &ForwardPass, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let slope = self.config.leaky_slope;
        let last_input = match pass.dense.last() {
            Some(d) => d.output.clone(),
            None => {
                let out = &pass.conv.last().expect("front-end stage").output;
                out.clone().reshape(&[out.dim(0), out.len() / out.dim(0)])?
            }
        };
        let cls = self.classifier.backward(&last_input, grad_logits, true)?;
        let mut g = cls.input.expect("requested");

        let mut dense_grads = Vec::with_capacity(self.dense.len());
        for (block, cache) in self.dense.iter().zip(&pass.dense).rev() {
            if cache.stats.is_none() {
                return Err(Error::InvalidInput(
                    "backward needs a training-mode forward pass".into(),
                ));
            }
            if let Some(mask) = &cache.mask {
                g.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
            }
            let g_norm = leaky_relu_backward(&cache.normed, &g, slope)?;
            let bn = block.norm.backward(&cache.norm, &g_norm)?;
            let d = block.dense.backward(&cache.input, &bn.input, true)?;
            g = d.input.expect("requested");
            dense_grads.push((d.weight, d.bias, bn.gain, bn.bias));
        }
        dense_grads.reverse();

        let last_conv = pass.conv.last().expect("front-end stage");
        let mut g = g.reshape(last_conv.output.shape())?;
        let mut conv_grads = Vec::with_capacity(self.blocks.len());
        let mut frontend_grads = None;
        for (stage, cache) in pass.conv.iter().enumerate().rev() {
            let norm = if stage == 0 {
                &self.frontend_norm
            } else {
                &self.blocks[stage - 1].norm
            };
            let g_norm = leaky_relu_backward(&cache.normed, &g, slope)?;
            let ln = norm.backward(&cache.norm, &g_norm)?;
            let g_pre = max_pool1d_backward(&ln.input, &cache.argmax, &cache.pre_pool_shape)?;
            if stage == 0 {
                let need_input = self.input_norm.is_some();
                let (param, gx) = match &self.frontend {
                    Frontend::Sinc(p) => {
                        let s = p.backward_impl(&cache.input, &g_pre, need_input)?;
                        (s.cutoffs, s.input)
                    }
                    Frontend::Conv(c) => {
                        let s = c.backward(&cache.input, &g_pre, need_input)?;
                        (s.weight, s.input)
                    }
                };
                frontend_grads = Some((param, ln.gain, ln.bias, gx));
            } else {
                let c = self.blocks[stage - 1].conv.backward(&cache.input, &g_pre, true)?;
                g = c.input.expect("requested");
                conv_grads.push((c.weight, c.bias.expect("block bias"), ln.gain, ln.bias));
            }
        }
        conv_grads.reverse();
        let (front_param, front_gain, front_bias, g_input) = frontend_grads.expect("front-end stage");

        let mut grads = Vec::new();
        if let Some(norm) = &self.input_norm {
            let g_input = g_input.expect("input gradient requested");
            let n = norm.backward(pass.input_norm.as_ref().expect("input norm cache"), &g_input)?;
            grads.push(n.gain);
            grads.push(n.bias);
        }
        grads.push(front_param);
        grads.push(front_gain);
        grads.push(front_bias);
        for (w, b, gain, bias) in conv_grads {
            grads.extend([w, b, gain, bias]);
        }
        for (w, b, gamma, beta) in dense_grads {
            grads.extend([w, b, gamma, beta]);
        }
        grads.push(cls.weight);
        grads.push(cls.bias);
        Ok(grads)
    }

    /// Rebuilds a model from named tensors (the inverse of
    /// [`parameters`](Self::parameters) plus [`buffers`](Self::buffers)).
    pub fn load_tensors(&mut self, params: Vec<Tensor>, buffers: Vec<Tensor>) -> Result<()> {
        let mut slots = self.parameters_mut();
        if slots.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                slots.len(),
                params.len()
            )));
        }
        for (slot, value) in slots.iter_mut().zip(params) {
            if slot.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter shape {:?} does not match architecture {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            **slot = value;
        }
        let mut slots = self.buffers_mut();
        if slots.len() != buffers.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} buffers, found {}",
                slots.len(),
                buffers.len()
            )));
        }
        for (slot, value) in slots.iter_mut().zip(buffers) {
            if slot.shape() != value.shape() {
                return Err(Error::Checkpoint("buffer shape mismatch".into()));
            }
            **slot = value;
        }
        Ok(())
    }
}
