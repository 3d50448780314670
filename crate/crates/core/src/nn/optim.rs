use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            alpha: 0.95,
            eps: 1e-7,
        }
    }
}

/// RMSprop with one squared-gradient accumulator per parameter tensor:
/// `v <- alpha v + (1 - alpha) g^2`, `theta <- theta - lr g / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    accumulators: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        Self {
            config,
            accumulators: Vec::new(),
        }
    }

    /// Restores a previously saved state.
    pub fn with_state(config: RmsPropConfig, accumulators: Vec<Tensor>) -> Self {
        Self {
            config,
            accumulators,
        }
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.accumulators.is_empty() {
            self.accumulators = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        }
        if self.accumulators.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {}",
                self.accumulators.len(),
                params.len()
            )));
        }
        for ((p, g), v) in params.iter().zip(grads).zip(&self.accumulators) {
            if p.shape() != g.shape() || p.shape() != v.shape() {
                return Err(Error::Shape(format!(
                    "parameter {:?}, gradient {:?}, accumulator {:?}",
                    p.shape(),
                    g.shape(),
                    v.shape()
                )));
            }
        }
        let RmsPropConfig { lr, alpha, eps } = self.config;
        for ((p, g), v) in params.iter_mut().zip(grads).zip(self.accumulators.iter_mut()) {
            for ((theta, &gi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(v.data_mut().iter_mut())
            {
                *vi = alpha * *vi + (1.0 - alpha) * gi * gi;
                *theta -= lr * gi / (vi.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Tensor {
        Tensor::filled(&[1], v)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut opt = RmsProp::new(RmsPropConfig::default());
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        opt.step(&mut [&mut p], &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_magnitude() {
        // lr g / (sqrt((1 - alpha) g^2) + eps) -> lr / sqrt(0.05) for large g.
        let mut opt = RmsProp::new(RmsPropConfig::default());
        let mut p = one(0.0);
        opt.step(&mut [&mut p], &[one(1e3)]).unwrap();
        let expected = 0.001 / 0.05f64.sqrt();
        assert!((expected - 0.004_472_136).abs() < 1e-9);
        assert!((p.data()[0] + expected).abs() < 1e-9);
    }

    #[test]
    fn constant_gradient_fixed_point() {
        let mut opt = RmsProp::new(RmsPropConfig::default());
        let mut p = one(0.0);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p.data()[0];
            opt.step(&mut [&mut p], &[one(1.0)]).unwrap();
            last = before - p.data()[0];
        }
        assert!((opt.accumulators()[0].data()[0] - 1.0).abs() < 1e-12);
        assert!((last - 0.001 / (1.0 + 1e-7)).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = RmsProp::new(RmsPropConfig::default());
        let mut p = one(0.0);
        assert!(opt.step(&mut [&mut p], &[Tensor::zeros(&[2])]).is_err());
        assert!(opt.step(&mut [&mut p], &[]).is_err());
    }
}
