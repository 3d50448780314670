//! Building blocks with hand-written adjoints.
//!
//! Each layer exposes a `forward` and a `backward`; the backward takes the
//! tensors saved by the forward plus the upstream gradient and returns the
//! gradients for its parameters and (optionally) its input.

use rand::Rng;

use super::tensor::{axpy, correlate_accumulate, correlate_input_grad, correlate_weight_grad, dot};
use super::Tensor;
use crate::error::{Error, Result};

/// `sqrt(6 / (fan_in + fan_out))`
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform initialization, `U(-bound, bound)`.
pub fn glorot_uniform<R: Rng>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let bound = glorot_bound(fan_in, fan_out);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product")
}

// ---------------------------------------------------------------------------
// conv1d

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `C_out x C_in x K`
    pub weight: Tensor,
    /// `C_out`, absent for bias-free layers.
    pub bias: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dGrads {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        weight.expect_rank(3, "conv weight")?;
        if let Some(b) = &bias {
            b.expect_shape(&[weight.dim(0)], "conv bias")?;
        }
        Ok(Self { weight, bias })
    }

    pub fn glorot<R: Rng>(c_in: usize, c_out: usize, kernel: usize, with_bias: bool, rng: &mut R) -> Self {
        let weight = glorot_uniform(&[c_out, c_in, kernel], c_in * kernel, c_out * kernel, rng);
        let bias = with_bias.then(|| Tensor::zeros(&[c_out]));
        Self { weight, bias }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Tensor::len)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        x.expect_rank(3, "conv input")?;
        if x.dim(1) != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_channels(),
                x.dim(1)
            )));
        }
        let t = x.dim(2);
        if t < self.kernel() {
            return Err(Error::Shape(format!(
                "input of length {t} is shorter than kernel {}",
                self.kernel()
            )));
        }
        Ok((x.dim(0), t, t - self.kernel() + 1))
    }

    /// Valid-mode cross-correlation plus bias: `B x C_out x (T - K + 1)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (batch, t_in, t_out) = self.check_input(x)?;
        let (c_out, c_in, k) = (self.out_channels(), self.in_channels(), self.kernel());
        let mut y = Tensor::zeros(&[batch, c_out, t_out]);
        for b in 0..batch {
            let xb = x.outer(b);
            let yb = y.outer_mut(b);
            for o in 0..c_out {
                let yo = &mut yb[o * t_out..(o + 1) * t_out];
                if let Some(bias) = &self.bias {
                    yo.fill(bias.data()[o]);
                }
                for i in 0..c_in {
                    let w = &self.weight.data()[(o * c_in + i) * k..(o * c_in + i + 1) * k];
                    correlate_accumulate(&xb[i * t_in..(i + 1) * t_in], w, yo);
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, upstream: &Tensor, need_input: bool) -> Result<Conv1dGrads> {
        let (batch, t_in, t_out) = self.check_input(x)?;
        let (c_out, c_in, k) = (self.out_channels(), self.in_channels(), self.kernel());
        upstream.expect_shape(&[batch, c_out, t_out], "conv upstream gradient")?;
        let mut gw = Tensor::zeros(self.weight.shape());
        let mut gb = self.bias.as_ref().map(|_| Tensor::zeros(&[c_out]));
        let mut gx = need_input.then(|| Tensor::zeros(x.shape()));
        for b in 0..batch {
            let xb = x.outer(b);
            let ub = upstream.outer(b);
            for o in 0..c_out {
                let up = &ub[o * t_out..(o + 1) * t_out];
                if let Some(gb) = gb.as_mut() {
                    gb.data_mut()[o] += up.iter().sum::<f64>();
                }
                for i in 0..c_in {
                    let widx = (o * c_in + i) * k..(o * c_in + i + 1) * k;
                    correlate_weight_grad(
                        &xb[i * t_in..(i + 1) * t_in],
                        up,
                        &mut gw.data_mut()[widx.clone()],
                    );
                    if let Some(gx) = gx.as_mut() {
                        correlate_input_grad(
                            up,
                            &self.weight.data()[widx],
                            &mut gx.outer_mut(b)[i * t_in..(i + 1) * t_in],
                        );
                    }
                }
            }
        }
        Ok(Conv1dGrads {
            weight: gw,
            bias: gb,
            input: gx,
        })
    }
}

// ---------------------------------------------------------------------------
// max pooling

/// Output of [`max_pool1d`]: pooled values and the flat input index each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling over the last axis of a `B x C x T` tensor.
/// The trailing remainder is dropped; ties go to the earliest index.
pub fn max_pool1d(x: &Tensor, pool: usize) -> Result<Pooled> {
    if pool < 1 {
        return Err(Error::InvalidSpec("pool width must be at least 1".into()));
    }
    x.expect_rank(3, "pool input")?;
    let (batch, channels, t) = (x.dim(0), x.dim(1), x.dim(2));
    let t_out = t / pool;
    if t_out == 0 {
        return Err(Error::Shape(format!("length {t} is shorter than pool {pool}")));
    }
    let mut out = Vec::with_capacity(batch * channels * t_out);
    let mut argmax = Vec::with_capacity(batch * channels * t_out);
    let data = x.data();
    for row in 0..batch * channels {
        let base = row * t;
        for j in 0..t_out {
            let start = base + j * pool;
            let mut best = start;
            for idx in start + 1..start + pool {
                if data[idx] > data[best] {
                    best = idx;
                }
            }
            out.push(data[best]);
            argmax.push(best);
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![batch, channels, t_out], out)?,
        argmax,
    })
}

/// Routes each upstream value to the input position that won the max.
pub fn max_pool1d_backward(upstream: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::Shape(format!(
            "pool upstream has {} values for {} windows",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(input_shape);
    for (&idx, &g) in argmax.iter().zip(upstream.data()) {
        gx.data_mut()[idx] += g;
    }
    Ok(gx)
}

// ---------------------------------------------------------------------------
// layer norm

/// Per-sample normalization over every non-batch feature, with a learnable
/// gain and bias per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormCache {
    pub normalized: Tensor,
    /// One `1 / sqrt(var + eps)` per normalization group.
    pub inv_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormGrads {
    pub gain: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

impl LayerNorm {
    /// `feature_shape` excludes the batch axis.
    pub fn new(feature_shape: &[usize], eps: f64) -> Result<Self> {
        let n: usize = feature_shape.iter().product();
        if n < 2 {
            return Err(Error::InvalidSpec(format!(
                "layer norm needs at least 2 features, got {n}"
            )));
        }
        Ok(Self {
            gain: Tensor::filled(feature_shape, 1.0),
            bias: Tensor::zeros(feature_shape),
            eps,
        })
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        if x.rank() < 2 || x.shape()[1..] != *self.gain.shape() {
            return Err(Error::Shape(format!(
                "layer norm over {:?} got input {:?}",
                self.gain.shape(),
                x.shape()
            )));
        }
        Ok(x.dim(0))
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, NormCache)> {
        let batch = self.check(x)?;
        let n = self.gain.len();
        let mut y = Tensor::zeros(x.shape());
        let mut normalized = Tensor::zeros(x.shape());
        let mut inv_std = Vec::with_capacity(batch);
        for b in 0..batch {
            let xb = x.outer(b);
            let mean = xb.iter().sum::<f64>() / n as f64;
            let var = xb.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + self.eps).sqrt();
            inv_std.push(r);
            let nb = normalized.outer_mut(b);
            for (h, &v) in nb.iter_mut().zip(xb) {
                *h = (v - mean) * r;
            }
            let yb = y.outer_mut(b);
            for (((yv, &h), &g), &beta) in yb
                .iter_mut()
                .zip(normalized.outer(b))
                .zip(self.gain.data())
                .zip(self.bias.data())
            {
                *yv = g * h + beta;
            }
        }
        Ok((y, NormCache { normalized, inv_std }))
    }

    pub fn backward(&self, cache: &NormCache, upstream: &Tensor) -> Result<NormGrads> {
        upstream.expect_shape(cache.normalized.shape(), "layer norm upstream gradient")?;
        let batch = upstream.dim(0);
        let n = self.gain.len() as f64;
        let mut g_gain = Tensor::zeros(self.gain.shape());
        let mut g_bias = Tensor::zeros(self.bias.shape());
        let mut gx = Tensor::zeros(upstream.shape());
        let mut dxhat = vec![0.0; self.gain.len()];
        for b in 0..batch {
            let up = upstream.outer(b);
            let xhat = cache.normalized.outer(b);
            for (i, (&u, &h)) in up.iter().zip(xhat).enumerate() {
                g_gain.data_mut()[i] += u * h;
                g_bias.data_mut()[i] += u;
                dxhat[i] = u * self.gain.data()[i];
            }
            let sum = dxhat.iter().sum::<f64>();
            let sum_h = dot(&dxhat, xhat);
            let r = cache.inv_std[b];
            for ((g, &d), &h) in gx.outer_mut(b).iter_mut().zip(&dxhat).zip(xhat) {
                *g = r / n * (n * d - sum - h * sum_h);
            }
        }
        Ok(NormGrads {
            gain: g_gain,
            bias: g_bias,
            input: gx,
        })
    }
}

// ---------------------------------------------------------------------------
// batch norm

/// Per-feature normalization of a `B x D` tensor over the batch axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
}

/// Batch statistics observed in a training-mode forward.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance.
    pub var: Vec<f64>,
    pub batch: usize,
}

impl BatchNorm {
    pub fn new(features: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: Tensor::filled(&[features], 1.0),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], 1.0),
            momentum,
            eps,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Training mode normalizes with batch statistics (returned so the caller
    /// can fold them into the running averages); inference mode uses the
    /// running averages.
    pub fn forward(&self, x: &Tensor, training: bool) -> Result<(Tensor, NormCache, Option<BatchStats>)> {
        x.expect_rank(2, "batch norm input")?;
        let (batch, d) = (x.dim(0), x.dim(1));
        if d != self.features() {
            return Err(Error::Shape(format!(
                "batch norm over {} features got {d}",
                self.features()
            )));
        }
        if training && batch < 2 {
            return Err(Error::InvalidBatch(format!(
                "training-mode batch norm needs at least 2 samples, got {batch}"
            )));
        }
        let (mean, var) = if training {
            let mut mean = vec![0.0; d];
            for b in 0..batch {
                axpy(1.0, x.outer(b), &mut mean);
            }
            mean.iter_mut().for_each(|m| *m /= batch as f64);
            let mut var = vec![0.0; d];
            for b in 0..batch {
                for ((v, &xv), &m) in var.iter_mut().zip(x.outer(b)).zip(&mean) {
                    *v += (xv - m) * (xv - m);
                }
            }
            var.iter_mut().for_each(|v| *v /= batch as f64);
            (mean, var)
        } else {
            (self.running_mean.data().to_vec(), self.running_var.data().to_vec())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut normalized = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        for b in 0..batch {
            let xb = x.outer(b);
            let hb = normalized.outer_mut(b);
            for j in 0..d {
                hb[j] = (xb[j] - mean[j]) * inv_std[j];
            }
            let hb = normalized.outer(b).to_vec();
            let yb = y.outer_mut(b);
            for j in 0..d {
                yb[j] = self.gamma.data()[j] * hb[j] + self.beta.data()[j];
            }
        }
        let stats = training.then_some(BatchStats { mean, var, batch });
        Ok((y, NormCache { normalized, inv_std }, stats))
    }

    /// `running <- (1 - momentum) running + momentum batch`, using the
    /// unbiased variance estimate for the running variance.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        let correction = stats.batch as f64 / (stats.batch as f64 - 1.0);
        for (r, &v) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = (1.0 - m) * *r + m * v;
        }
        for (r, &v) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = (1.0 - m) * *r + m * v * correction;
        }
    }

    /// Backward of a training-mode forward.
    pub fn backward(&self, cache: &NormCache, upstream: &Tensor) -> Result<NormGrads> {
        upstream.expect_shape(cache.normalized.shape(), "batch norm upstream gradient")?;
        let (batch, d) = (upstream.dim(0), upstream.dim(1));
        let n = batch as f64;
        let mut g_gamma = vec![0.0; d];
        let mut g_beta = vec![0.0; d];
        for b in 0..batch {
            let up = upstream.outer(b);
            let h = cache.normalized.outer(b);
            for j in 0..d {
                g_gamma[j] += up[j] * h[j];
                g_beta[j] += up[j];
            }
        }
        // sum_b dxhat = gamma * g_beta, sum_b dxhat * xhat = gamma * g_gamma
        let mut gx = Tensor::zeros(upstream.shape());
        for b in 0..batch {
            let up = upstream.outer(b);
            let h = cache.normalized.outer(b).to_vec();
            let gb = gx.outer_mut(b);
            for j in 0..d {
                let gamma = self.gamma.data()[j];
                gb[j] = cache.inv_std[j] / n
                    * (n * up[j] * gamma - gamma * g_beta[j] - h[j] * gamma * g_gamma[j]);
            }
        }
        Ok(NormGrads {
            gain: Tensor::new(vec![d], g_gamma)?,
            bias: Tensor::new(vec![d], g_beta)?,
            input: gx,
        })
    }
}

// ---------------------------------------------------------------------------
// leaky relu

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { slope * v })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Derivative is 1 for `x > 0` and `slope` otherwise (including `x == 0`).
pub fn leaky_relu_backward(x: &Tensor, upstream: &Tensor, slope: f64) -> Result<Tensor> {
    upstream.expect_shape(x.shape(), "leaky relu upstream gradient")?;
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&v, &u)| if v > 0.0 { u } else { slope * u })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

// ---------------------------------------------------------------------------
// dense

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `D_out x D_in`
    pub weight: Tensor,
    /// `D_out`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Tensor,
    pub bias: Tensor,
    pub input: Option<Tensor>,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        weight.expect_rank(2, "dense weight")?;
        bias.expect_shape(&[weight.dim(0)], "dense bias")?;
        Ok(Self { weight, bias })
    }

    pub fn glorot<R: Rng>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            weight: glorot_uniform(&[d_out, d_in], d_in, d_out, rng),
            bias: Tensor::zeros(&[d_out]),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.dim(0)
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        x.expect_rank(2, "dense input")?;
        if x.dim(1) != self.in_features() {
            return Err(Error::Shape(format!(
                "dense layer takes {} features, got {}",
                self.in_features(),
                x.dim(1)
            )));
        }
        Ok(x.dim(0))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let batch = self.check(x)?;
        let (d_in, d_out) = (self.in_features(), self.out_features());
        let mut y = Tensor::zeros(&[batch, d_out]);
        for b in 0..batch {
            let xb = x.outer(b);
            let yb = y.outer_mut(b);
            for o in 0..d_out {
                yb[o] = dot(&self.weight.data()[o * d_in..(o + 1) * d_in], xb) + self.bias.data()[o];
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, upstream: &Tensor, need_input: bool) -> Result<DenseGrads> {
        let batch = self.check(x)?;
        let (d_in, d_out) = (self.in_features(), self.out_features());
        upstream.expect_shape(&[batch, d_out], "dense upstream gradient")?;
        let mut gw = Tensor::zeros(self.weight.shape());
        let mut gb = Tensor::zeros(&[d_out]);
        let mut gx = need_input.then(|| Tensor::zeros(x.shape()));
        for b in 0..batch {
            let xb = x.outer(b);
            let up = upstream.outer(b);
            for o in 0..d_out {
                let u = up[o];
                gb.data_mut()[o] += u;
                axpy(u, xb, &mut gw.data_mut()[o * d_in..(o + 1) * d_in]);
                if let Some(gx) = gx.as_mut() {
                    axpy(u, &self.weight.data()[o * d_in..(o + 1) * d_in], gx.outer_mut(b));
                }
            }
        }
        Ok(DenseGrads {
            weight: gw,
            bias: gb,
            input: gx,
        })
    }
}

// ---------------------------------------------------------------------------
// softmax + cross entropy

/// Row-wise softmax of `B x C` logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank(2, "logits")?;
    let mut out = Tensor::zeros(logits.shape());
    for b in 0..logits.dim(0) {
        let row = logits.outer(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let o = out.outer_mut(b);
        for (p, &z) in o.iter_mut().zip(row) {
            *p = (z - max).exp();
        }
        let sum: f64 = o.iter().sum();
        o.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(out)
}

/// Mean negative log-likelihood over the batch and its gradient
/// `(softmax - onehot) / B`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    logits.expect_rank(2, "logits")?;
    let (batch, classes) = (logits.dim(0), logits.dim(1));
    if targets.len() != batch {
        return Err(Error::Shape(format!(
            "{} targets for a batch of {batch}",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::InvalidLabel(format!(
            "target {bad} outside [0, {classes})"
        )));
    }
    let mut grad = softmax(logits)?;
    let mut loss = 0.0;
    for (b, &t) in targets.iter().enumerate() {
        let row = logits.outer(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
        let g = grad.outer_mut(b);
        g[t] -= 1.0;
        g.iter_mut().for_each(|v| *v /= batch as f64);
    }
    Ok((loss / batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_conv_is_identity() {
        let conv = Conv1d::new(Tensor::filled(&[1, 1, 1], 1.0), Some(Tensor::zeros(&[1]))).unwrap();
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(conv.forward(&x).unwrap(), x);
    }

    #[test]
    fn baseline_first_layer_weight_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv1d::glorot(1, 80, 100, false, &mut rng);
        assert_eq!(conv.parameter_count(), 8000);
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv1d::glorot(2, 3, 5, true, &mut rng);
        assert_eq!(conv.forward(&Tensor::zeros(&[1, 1, 10])).unwrap_err().kind(), "shape");
        assert_eq!(conv.forward(&Tensor::zeros(&[1, 2, 4])).unwrap_err().kind(), "shape");
    }

    #[test]
    fn max_pool_examples() {
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(max_pool1d(&x, 1).unwrap().output, x);
        let p = max_pool1d(&x, 2).unwrap();
        assert_eq!(p.output.data(), &[3.0, 5.0]);
        let up = Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap();
        let g = max_pool1d_backward(&up, &p.argmax, x.shape()).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(max_pool1d(&x, 0).unwrap_err().kind(), "invalid-spec");
    }

    #[test]
    fn max_pool_drops_remainder_and_prefers_first_tie() {
        let x = Tensor::new(vec![1, 1, 5], vec![2.0, 2.0, 1.0, 1.0, 9.0]).unwrap();
        let p = max_pool1d(&x, 2).unwrap();
        assert_eq!(p.output.data(), &[2.0, 1.0]);
        assert_eq!(p.argmax, vec![0, 2]);
    }

    #[test]
    fn layer_norm_constant_and_moments() {
        let ln = LayerNorm::new(&[2, 3], 1e-5).unwrap();
        let (y, _) = ln.forward(&Tensor::filled(&[1, 2, 3], 4.2)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ln = LayerNorm::new(&[64], 1e-5).unwrap();
        let data: Vec<f64> = (0..128).map(|_| rng.gen_range(-3.0..5.0)).collect();
        let (y, _) = ln.forward(&Tensor::new(vec![2, 64], data).unwrap()).unwrap();
        for b in 0..2 {
            let row = y.outer(b);
            let mean = row.iter().sum::<f64>() / 64.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-5, "var {var}");
        }
        assert!(LayerNorm::new(&[1], 1e-5).is_err());
    }

    #[test]
    fn batch_norm_constant_feature_and_mean() {
        let bn = BatchNorm::new(2, 0.1, 1e-5);
        let x = Tensor::new(vec![3, 2], vec![1.0, 5.0, 1.0, -2.0, 1.0, 0.5]).unwrap();
        let (y, _, stats) = bn.forward(&x, true).unwrap();
        for b in 0..3 {
            assert_eq!(y.outer(b)[0], 0.0);
        }
        let mean: f64 = (0..3).map(|b| y.outer(b)[1]).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-6);
        assert_eq!(stats.unwrap().batch, 3);
        let single = Tensor::zeros(&[1, 2]);
        assert_eq!(bn.forward(&single, true).unwrap_err().kind(), "invalid-batch");
        assert!(bn.forward(&single, false).is_ok());
    }

    #[test]
    fn batch_norm_running_average() {
        let mut bn = BatchNorm::new(1, 0.1, 1e-5);
        bn.update_running(&BatchStats {
            mean: vec![2.0],
            var: vec![4.0],
            batch: 5,
        });
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var.data()[0] - (0.9 + 0.1 * 5.0)).abs() < 1e-15);
    }

    #[test]
    fn leaky_relu_examples() {
        let x = Tensor::new(vec![3], vec![2.0, -1.0, 0.0]).unwrap();
        assert_eq!(leaky_relu(&x, 0.2).data(), &[2.0, -0.2, 0.0]);
        assert_eq!(leaky_relu(&x, 1.0), x);
        let g = leaky_relu_backward(&x, &Tensor::filled(&[3], 1.0), 0.2).unwrap();
        assert_eq!(g.data(), &[1.0, 0.2, 0.2]);
    }

    #[test]
    fn dense_identity_and_glorot_bound() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let d = Dense::new(w, Tensor::zeros(&[3])).unwrap();
        let x = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap();
        assert_eq!(d.forward(&x).unwrap(), x);

        let bound = glorot_bound(2048, 2048);
        assert!((bound - 0.038_273_277).abs() < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Dense::glorot(2048, 2048, &mut rng);
        let max = d.weight.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= bound && max > 0.99 * bound);
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, _) = softmax_cross_entropy(&Tensor::zeros(&[1, 4]), &[2]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        let logits = Tensor::new(vec![1, 2], vec![1000.0, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-12 && grad.all_finite());
        let p = softmax(&Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]).unwrap()).unwrap();
        for b in 0..2 {
            assert!((p.outer(b).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(
            softmax_cross_entropy(&logits, &[2]).unwrap_err().kind(),
            "invalid-label"
        );
    }
}
