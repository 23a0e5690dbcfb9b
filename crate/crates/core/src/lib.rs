//! Click-through-rate prediction on sparse, field-grouped data.
//!
//! The crate trains a zoo of CTR models from scratch (LR, Poly-2, FM, DNN,
//! FNN, the PNN family, LR&DNN, FM&DNN and the DeepFM family) with
//! hand-derived gradients, and provides the evaluation and simulation
//! tooling around them.
//!
//! All math is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the 64-bit instantiation used for training.

pub mod error;
pub mod featurespace;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod simulate;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Scalar;

pub type Model64 = models::Model<f64>;
pub type Model32 = models::Model<f32>;
pub type ParameterStore64 = models::ParameterStore<f64>;
pub type ParameterStore32 = models::ParameterStore<f32>;
pub type GradientSet64 = models::GradientSet<f64>;
pub type GradientSet32 = models::GradientSet<f32>;
