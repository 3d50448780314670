//! The learnable sinc front-end layer.
//!
//! Only two numbers per filter are learned: the raw low and high cutoffs.
//! Each forward pass materializes the windowed band-pass bank from them and
//! cross-correlates it with the input; the backward pass pushes the tap
//! gradients through the closed-form tap sensitivities and the constraint
//! Jacobian down to the raw cutoffs.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filter::{
    constrain_cutoffs, make_window, mel_init_cutoffs, ConstrainedCutoffs, FilterBank, FilterSpec,
    RawCutoffs,
};
use crate::nn::tensor::{correlate_accumulate, correlate_input_grad, correlate_weight_grad};
use crate::nn::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SincLayerParams {
    /// `F x 2` raw `(f1, f2)` pairs, normalized frequency.
    raw: Tensor,
    spec: FilterSpec,
}

/// Gradients produced by [`SincLayerParams::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct SincGrads {
    /// `F x 2`: d loss / d raw `f1`, `f2` per filter.
    pub cutoffs: Tensor,
    /// Same shape as the layer input, when requested.
    pub input: Option<Tensor>,
}

/// `sign` with `sign(0) = 0`, the subgradient used at constraint kinks.
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SincLayerParams {
    pub fn new(raw_cutoffs: Vec<RawCutoffs>, spec: FilterSpec) -> Result<Self> {
        spec.validate()?;
        if raw_cutoffs.is_empty() {
            return Err(Error::InvalidSpec("sinc layer needs at least one filter".into()));
        }
        for raw in &raw_cutoffs {
            constrain_cutoffs(*raw)?;
        }
        let data = raw_cutoffs.iter().flat_map(|c| [c.f1, c.f2]).collect();
        let raw = Tensor::new(vec![raw_cutoffs.len(), 2], data)?;
        Ok(Self { raw, spec })
    }

    /// Mel-spaced initialization.
    pub fn mel(n_filters: usize, spec: FilterSpec) -> Result<Self> {
        Self::new(mel_init_cutoffs(n_filters, spec.sample_rate)?, spec)
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn num_filters(&self) -> usize {
        self.raw.dim(0)
    }

    /// Learnable parameters: two per filter, independent of the filter length.
    pub fn parameter_count(&self) -> usize {
        self.raw.len()
    }

    pub fn raw_cutoffs(&self) -> Vec<RawCutoffs> {
        self.raw
            .data()
            .chunks_exact(2)
            .map(|p| RawCutoffs::new(p[0], p[1]))
            .collect()
    }

    pub fn constrained(&self) -> Result<Vec<ConstrainedCutoffs>> {
        self.raw_cutoffs().into_iter().map(constrain_cutoffs).collect()
    }

    /// Raw cutoffs as an `F x 2` tensor; this is what the optimizer updates.
    pub fn cutoffs(&self) -> &Tensor {
        &self.raw
    }

    pub fn cutoffs_mut(&mut self) -> &mut Tensor {
        &mut self.raw
    }

    /// Filters whose upper cutoff drifted above Nyquist (never clamped).
    pub fn above_nyquist(&self) -> Vec<usize> {
        self.raw_cutoffs()
            .into_iter()
            .enumerate()
            .filter_map(|(i, r)| match constrain_cutoffs(r) {
                Ok(c) if c.f2_abs() > 0.5 => Some(i),
                _ => None,
            })
            .collect()
    }

    /// Windowed band-pass bank for the current cutoffs.
    pub fn materialize(&self) -> Result<FilterBank> {
        FilterBank::from_cutoffs(&self.spec, &self.constrained()?)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        x.expect_rank(3, "sinc input")?;
        let (batch, channels, t_in) = (x.dim(0), x.dim(1), x.dim(2));
        if channels != 1 {
            return Err(Error::Shape(format!(
                "sinc layer takes mono input, got {channels} channels"
            )));
        }
        if t_in < self.spec.length {
            return Err(Error::Shape(format!(
                "input of {t_in} samples is shorter than the {}-tap filters",
                self.spec.length
            )));
        }
        Ok((batch, t_in, t_in - self.spec.length + 1))
    }

    /// Valid-mode cross-correlation of `batch x 1 x T` input with every filter:
    /// `batch x F x (T - L + 1)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let bank = self.materialize()?;
        self.forward_with_bank(x, &bank)
    }

    pub(crate) fn forward_with_bank(&self, x: &Tensor, bank: &FilterBank) -> Result<Tensor> {
        let (batch, _, t_out) = self.check_input(x)?;
        let n_filters = bank.num_filters();
        let mut y = Tensor::zeros(&[batch, n_filters, t_out]);
        for b in 0..batch {
            let xb = x.outer(b);
            let yb = y.outer_mut(b);
            for (f, row) in bank.rows().enumerate() {
                correlate_accumulate(xb, row, &mut yb[f * t_out..(f + 1) * t_out]);
            }
        }
        Ok(y)
    }

    /// Gradients of a scalar loss given `upstream = d loss / d output`.
    pub fn backward(&self, x: &Tensor, upstream: &Tensor) -> Result<SincGrads> {
        self.backward_impl(x, upstream, true)
    }

    /// As [`backward`](Self::backward) but skips the input gradient.
    pub fn backward_params(&self, x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
        Ok(self.backward_impl(x, upstream, false)?.cutoffs)
    }

    pub(crate) fn backward_impl(
        &self,
        x: &Tensor,
        upstream: &Tensor,
        need_input: bool,
    ) -> Result<SincGrads> {
        let (batch, t_in, t_out) = self.check_input(x)?;
        let n_filters = self.num_filters();
        let length = self.spec.length;
        upstream.expect_shape(&[batch, n_filters, t_out], "sinc upstream gradient")?;
        let bank = self.materialize()?;

        // Stage (a): d loss / d windowed taps, and the input gradient.
        let mut tap_grad = vec![0.0; n_filters * length];
        let mut grad_input = need_input.then(|| Tensor::zeros(&[batch, 1, t_in]));
        for b in 0..batch {
            let xb = x.outer(b);
            let ub = upstream.outer(b);
            for f in 0..n_filters {
                let up = &ub[f * t_out..(f + 1) * t_out];
                correlate_weight_grad(xb, up, &mut tap_grad[f * length..(f + 1) * length]);
                if let Some(gx) = grad_input.as_mut() {
                    correlate_input_grad(up, bank.row(f), gx.outer_mut(b));
                }
            }
        }

        // Stages (b) and (c): tap sensitivities, then the constraint Jacobian.
        let window = make_window(self.spec.window, length)?;
        let center = self.spec.center() as f64;
        let mut grad_cutoffs = Vec::with_capacity(2 * n_filters);
        for (f, raw) in self.raw_cutoffs().iter().enumerate() {
            let c = constrain_cutoffs(*raw)?;
            let (mut d_f1_abs, mut d_f2_abs) = (0.0, 0.0);
            for (i, (&g, &w)) in tap_grad[f * length..(f + 1) * length]
                .iter()
                .zip(&window)
                .enumerate()
            {
                let n = i as f64 - center;
                d_f2_abs += g * 2.0 * (2.0 * PI * c.f2_abs() * n).cos() * w;
                d_f1_abs -= g * 2.0 * (2.0 * PI * c.f1_abs() * n).cos() * w;
            }
            let s1 = sign0(raw.f1);
            let s21 = sign0(raw.f2 - c.f1_abs());
            grad_cutoffs.push(d_f1_abs * s1 + d_f2_abs * s1 * (1.0 - s21));
            grad_cutoffs.push(d_f2_abs * s21);
        }

        Ok(SincGrads {
            cutoffs: Tensor::new(vec![n_filters, 2], grad_cutoffs)?,
            input: grad_input,
        })
    }
}
