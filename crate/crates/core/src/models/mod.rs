//! The model zoo: wide (LR, Poly-2, FM), deep (DNN, FNN, IPNN, OPNN, PNN*),
//! hybrid (LR&DNN, FM&DNN) and DeepFM variants, with hand-derived backprop.
//!
//! Every kind shares one forward/backward engine. A logit is the sum of up to
//! three parts: the order-1 term, the pairwise term (FM or Poly-2), and the
//! deep component. DeepFM kinds feed the FM latent table `V` to the deep part
//! directly; hybrids give the deep part its own table of width `k + 1`.

mod checkpoint;
mod model;
mod product;
mod spec;
mod store;

pub use checkpoint::{load_checkpoint, save_checkpoint, sidecar_path, CheckpointHeader, TensorEntry};
pub use model::{pair_slot, pretrain_fnn, Dropout, Model, Parts, Workspace};
pub use product::{num_pairs, product_backward, product_forward, product_len};
pub use spec::{ModelKind, ModelSpec, OuterMode, Product};
pub use store::{DeepParams, DenseLayer, GradientSet, LayerNormParams, ParameterStore, RowSet, TensorId};
