//! Minimal neural building blocks, each shipping its own adjoint.

pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod optim;
pub(crate) mod tensor;

pub use checkpoint::Checkpoint;
pub use layers::{
    glorot_bound, glorot_uniform, leaky_relu, leaky_relu_backward, max_pool1d, max_pool1d_backward,
    softmax, softmax_cross_entropy, BatchNorm, Conv1d, Dense, LayerNorm,
};
pub use model::{
    ConvBlockConfig, ForwardPass, Frontend, FrontendConfig, FrontendKind, Mode, Model, ModelShape,
    NetworkConfig,
};
pub use optim::{RmsProp, RmsPropConfig};
pub use tensor::Tensor;
