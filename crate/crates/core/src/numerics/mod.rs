//! Dense numeric kernel shared by every model: matrices, activations,
//! dropout, layer normalization and seeded random streams.

mod activation;
mod dropout;
mod layer_norm;
mod matrix;
mod rng;
mod scalar;

pub use activation::{activate, activate_grad, sigmoid, Activation, SIGMOID_CLAMP};
pub(crate) use dropout::fill_dropout_mask;
pub use dropout::{apply_mask, check_keep_prob, dropout_mask};
pub use layer_norm::{layer_norm, layer_norm_backward, layer_norm_into, LayerNormCache};
pub use matrix::{affine, DenseMatrix};
pub use rng::{derive_seed, fill_normal, mix64, rng_stream, RngStream};
pub use scalar::{axpy, dot, Scalar};
