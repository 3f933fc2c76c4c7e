//! Dense `f64` tensors and tape-based reverse-mode differentiation.

mod kernels;
mod params;
mod tape;
mod tensor;

pub use kernels::{affine, gelu, layer_norm, sigmoid, softmax, softplus};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

/// Default layer-norm epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;
