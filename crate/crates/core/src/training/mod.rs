//! Objective, optimizers, L2 and the data-parallel training loop.

mod loss;
mod optim;
mod trainer;

pub use loss::{logloss, loss_and_grad, loss_grad, P_CLIP};
pub use optim::{AdamConfig, FtrlConfig, OptimizerKind, OptimizerState};
pub use trainer::{regularize, scaled_lr, write_log_jsonl, StepLog, TrainConfig, Trainer};
