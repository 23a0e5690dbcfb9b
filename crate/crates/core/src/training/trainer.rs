use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::loss::loss_and_grad;
use super::optim::{OptimizerKind, OptimizerState};
use crate::error::{Error, Result};
use crate::featurespace::{epoch_order, Batch, SparseInstance};
use crate::models::{Dropout, GradientSet, Model, ParameterStore, TensorId, Workspace};
use crate::numerics::{derive_seed, Scalar};

const DROPOUT_TAG: u64 = 0xD0;
const SHUFFLE_TAG: u64 = 0x5F;

fn default_one() -> usize {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Instances per optimizer step, split across `workers`.
    pub bs: usize,
    pub lr: f64,
    pub epochs: usize,
    /// L2 coefficient on `w` and `V`.
    #[serde(default)]
    pub l2_fm: f64,
    #[serde(default = "default_one")]
    pub workers: usize,
    /// Multiply `lr` by `√workers`.
    #[serde(default)]
    pub lr_scale_on_parallel: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_true")]
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn new(bs: usize, lr: f64, epochs: usize) -> Self {
        Self {
            bs,
            lr,
            epochs,
            l2_fm: 0.0,
            workers: 1,
            lr_scale_on_parallel: false,
            seed: 0,
            optimizer: OptimizerKind::default(),
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs == 0 {
            return Err(Error::Config("bs must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        if !(self.l2_fm >= 0.0 && self.l2_fm.is_finite()) {
            return Err(Error::Config(format!("l2_fm must be non-negative, got {}", self.l2_fm)));
        }
        Ok(())
    }

    /// Learning rate actually applied per step.
    pub fn effective_lr(&self) -> f64 {
        if self.lr_scale_on_parallel {
            scaled_lr(self.lr, self.workers, 1.0).unwrap_or(self.lr)
        } else {
            self.lr
        }
    }
}

/// `lr · √(P · bs_ratio)`: the step-size growth matching a `P · bs_ratio`-fold
/// larger mini-batch. `bs_ratio` is each worker's batch relative to the
/// single-worker batch (1 when every worker sees a full batch).
pub fn scaled_lr(lr: f64, workers: usize, bs_ratio: f64) -> Result<f64> {
    if workers == 0 {
        return Err(Error::Parameter("workers must be at least 1".into()));
    }
    if !(bs_ratio > 0.0) {
        return Err(Error::Parameter(format!("bs_ratio must be positive, got {bs_ratio}")));
    }
    Ok(lr * (workers as f64 * bs_ratio).sqrt())
}

/// Adds `l2 · w` and `l2 · V` on the rows present in `grads`. Deep tensors
/// and the global bias are left alone.
pub fn regularize<T: Scalar>(grads: &mut GradientSet<T>, store: &ParameterStore<T>, l2_fm: f64) {
    if l2_fm == 0.0 {
        return;
    }
    let l2 = T::of(l2_fm);
    for &r in grads.touched_w.rows() {
        grads.grads.w[r as usize] += l2 * store.w[r as usize];
    }
    for &r in grads.touched_v.rows() {
        let r = r as usize;
        for (g, &v) in grads.grads.v.row_mut(r).iter_mut().zip(store.v.row(r)) {
            *g += l2 * v;
        }
    }
}

/// One optimizer step in the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_time: f64,
    pub lr: f64,
}

pub fn write_log_jsonl(path: &Path, log: &[StepLog]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for entry in log {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

struct Worker<T> {
    ws: Workspace<T>,
    grads: GradientSet<T>,
    loss: T,
}

/// Synchronous data-parallel trainer.
///
/// Each step splits the batch into `workers` contiguous shards. Workers read
/// the frozen model and sum per-instance gradients into private buffers; the
/// coordinator adds the buffers in worker order, divides once by the batch
/// size, applies L2 and takes one optimizer step.
pub struct Trainer<T> {
    pub model: Model<T>,
    pub optimizer: OptimizerState<T>,
    pub config: TrainConfig,
    step: usize,
    epoch: usize,
    workers: Vec<Worker<T>>,
    reduced: GradientSet<T>,
    started: Instant,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = OptimizerState::new(config.optimizer, &model)?;
        let workers = (0..config.workers)
            .map(|_| Worker { ws: model.workspace(), grads: model.zero_gradients(), loss: T::zero() })
            .collect();
        let reduced = model.zero_gradients();
        Ok(Self { model, optimizer, config, step: 0, epoch: 0, workers, reduced, started: Instant::now() })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn into_model(self) -> Model<T> {
        self.model
    }

    /// Fills the reduction buffer with the batch-mean gradient (before L2);
    /// returns the batch-mean loss.
    fn reduce(&mut self, batch: &[SparseInstance], dropout_seed: u64) -> T {
        let bs = batch.len();
        let p = self.workers.len();
        let shard = bs / p;
        let bounds = |w: usize| {
            let start = (w * shard).min(bs);
            let end = if w + 1 == p { bs } else { ((w + 1) * shard).min(bs) };
            (start, end)
        };
        let model = &self.model;
        let run = |w: usize, worker: &mut Worker<T>| {
            let (start, end) = bounds(w);
            worker.grads.clear();
            let dropout = Dropout { seed: dropout_seed, first_index: start as u64 };
            worker.loss = model.accumulate_gradients(
                &batch[start..end],
                Some(dropout),
                loss_and_grad,
                &mut worker.ws,
                &mut worker.grads,
            );
        };
        if p == 1 {
            run(0, &mut self.workers[0]);
        } else {
            std::thread::scope(|s| {
                for (w, worker) in self.workers.iter_mut().enumerate() {
                    s.spawn(move || run(w, worker));
                }
            });
        }
        self.reduced.clear();
        let mut loss = T::zero();
        for worker in &self.workers {
            loss += worker.loss;
            self.reduced.accumulate(&worker.grads).expect("worker gradients share the model's layout");
        }
        let inv = T::one() / T::of(bs as f64);
        self.reduced.scale(inv);
        loss * inv
    }

    /// Batch-mean gradient and loss at the current parameters, without updating.
    pub fn gradient(&mut self, batch: &[SparseInstance]) -> Result<(GradientSet<T>, T)> {
        self.check_batch(batch)?;
        let seed = derive_seed(self.config.seed, &[DROPOUT_TAG, self.step as u64]);
        let loss = self.reduce(batch, seed);
        Ok((self.reduced.clone(), loss))
    }

    fn check_batch(&self, batch: &[SparseInstance]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        batch.iter().try_for_each(|i| self.model.check_instance(i))
    }

    /// forward → loss → backward → average → L2 → optimizer step.
    pub fn train_step(&mut self, batch: &[SparseInstance]) -> Result<StepLog> {
        self.check_batch(batch)?;
        self.step_unchecked(batch, self.step)
    }

    fn step_unchecked(&mut self, batch: &[SparseInstance], batch_index: usize) -> Result<StepLog> {
        let seed = derive_seed(self.config.seed, &[DROPOUT_TAG, self.step as u64]);
        let loss = self.reduce(batch, seed);
        regularize(&mut self.reduced, &self.model.store, self.config.l2_fm);
        if !loss.is_finite() {
            let tensor = self
                .model
                .store
                .first_non_finite()
                .map(|t| format!("parameter {t}"))
                .or_else(|| self.reduced.first_non_finite().map(|t| format!("gradient {t}")))
                .unwrap_or_else(|| "loss".into());
            return Err(Error::NonFinite { step: self.step, batch: batch_index, tensor });
        }
        let lr = self.config.effective_lr();
        self.optimizer.step(&mut self.model.store, &self.reduced, lr)?;
        if let Some(t) = self.model.store.first_non_finite() {
            return Err(Error::NonFinite { step: self.step, batch: batch_index, tensor: format!("parameter {t}") });
        }
        let entry = StepLog {
            step: self.step,
            epoch: self.epoch,
            mean_loss: loss.as_f64(),
            wall_time: self.started.elapsed().as_secs_f64(),
            lr,
        };
        self.step += 1;
        Ok(entry)
    }

    /// One pass over `data` in mini-batches of `config.bs`, reshuffled per
    /// epoch when `config.shuffle` is set.
    pub fn train_epoch(&mut self, data: &[SparseInstance]) -> Result<Vec<StepLog>> {
        data.iter().try_for_each(|i| self.model.check_instance(i))?;
        let order = epoch_order(
            data.len(),
            self.config.shuffle.then(|| derive_seed(self.config.seed, &[SHUFFLE_TAG, self.epoch as u64])),
        );
        let mut log = Vec::with_capacity(data.len().div_ceil(self.config.bs));
        let mut buf = Vec::with_capacity(self.config.bs);
        for (b, chunk) in order.chunks(self.config.bs).enumerate() {
            buf.clear();
            buf.extend(chunk.iter().map(|&i| data[i].clone()));
            log.push(self.step_unchecked(&buf, b)?);
        }
        self.epoch += 1;
        Ok(log)
    }

    /// One pass over a batch stream (for example an async reader).
    pub fn train_batches<I>(&mut self, batches: I) -> Result<Vec<StepLog>>
    where
        I: IntoIterator<Item = Result<Batch>>,
    {
        let mut log = Vec::new();
        for (b, batch) in batches.into_iter().enumerate() {
            let batch = batch?;
            self.check_batch(&batch)?;
            log.push(self.step_unchecked(&batch, b)?);
        }
        self.epoch += 1;
        Ok(log)
    }

    /// Runs `config.epochs` epochs.
    pub fn fit(&mut self, data: &[SparseInstance]) -> Result<Vec<StepLog>> {
        let mut log = Vec::new();
        for _ in 0..self.config.epochs {
            log.extend(self.train_epoch(data)?);
        }
        Ok(log)
    }

    /// Most recent batch-mean gradient of one tensor.
    pub fn last_gradient(&self, id: TensorId) -> Option<&[T]> {
        self.reduced.tensor(id)
    }
}
