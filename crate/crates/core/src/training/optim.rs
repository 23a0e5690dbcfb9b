use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{GradientSet, Model, ModelKind, ParameterStore, TensorId};
use crate::numerics::Scalar;

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

fn default_alpha() -> f64 {
    0.1
}
fn default_one() -> f64 {
    1.0
}

/// FTRL-Proximal settings. The learning rate of a training run is not used;
/// `alpha` plays that role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtrlConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub beta: f64,
    #[serde(default = "default_one")]
    pub l1: f64,
    #[serde(default = "default_one")]
    pub l2: f64,
}

impl Default for FtrlConfig {
    fn default() -> Self {
        Self { alpha: 0.1, beta: 1.0, l1: 1.0, l2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam(AdamConfig),
    Ftrl(FtrlConfig),
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam(AdamConfig::default())
    }
}

#[derive(Debug, Clone)]
struct AdamState<T> {
    m: ParameterStore<T>,
    v: ParameterStore<T>,
}

#[derive(Debug, Clone)]
struct FtrlState<T> {
    z: ParameterStore<T>,
    n: ParameterStore<T>,
}

/// Optimizer accumulators shaped like the model's store.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    steps: u64,
    adam: Option<AdamState<T>>,
    ftrl: Option<FtrlState<T>>,
}

fn zeros_like<T: Scalar>(store: &ParameterStore<T>) -> ParameterStore<T> {
    let mut z = store.clone();
    for (_, t) in z.tensors_mut() {
        t.iter_mut().for_each(|x| *x = T::zero());
    }
    z
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, model: &Model<T>) -> Result<Self> {
        match kind {
            OptimizerKind::Adam(c) => {
                if !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) || !(c.epsilon > 0.0) {
                    return Err(Error::Config(format!("bad Adam settings {c:?}")));
                }
                Ok(Self {
                    kind,
                    steps: 0,
                    adam: Some(AdamState { m: zeros_like(&model.store), v: zeros_like(&model.store) }),
                    ftrl: None,
                })
            }
            OptimizerKind::Ftrl(c) => {
                if model.kind() != ModelKind::Lr {
                    return Err(Error::Config(format!(
                        "FTRL applies to the order-1 weights of LR only, not {}",
                        model.kind()
                    )));
                }
                if !(c.alpha > 0.0) || c.beta < 0.0 || c.l1 < 0.0 || c.l2 < 0.0 {
                    return Err(Error::Config(format!("bad FTRL settings {c:?}")));
                }
                Ok(Self {
                    kind,
                    steps: 0,
                    adam: None,
                    ftrl: Some(FtrlState { z: zeros_like(&model.store), n: zeros_like(&model.store) }),
                })
            }
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from `grads` (already averaged and regularized).
    /// `lr` is ignored by FTRL.
    pub fn step(&mut self, store: &mut ParameterStore<T>, grads: &GradientSet<T>, lr: f64) -> Result<()> {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Adam(c) => {
                let st = self.adam.as_mut().expect("adam state");
                adam_update(c, self.steps, lr, store, grads, st);
            }
            OptimizerKind::Ftrl(c) => {
                let st = self.ftrl.as_mut().expect("ftrl state");
                ftrl_update(c, store, grads, st)?;
            }
        }
        Ok(())
    }
}

/// Spans of tensor `id` an update visits, as `(start, len)`: touched rows of
/// sparse tensors, everything for dense ones.
fn visit_ranges<T: Scalar>(grads: &GradientSet<T>, id: TensorId, len: usize, width: usize) -> Vec<(usize, usize)> {
    match grads.touched(id) {
        Some(rows) => rows.iter().map(|&r| (r as usize * width, width)).collect(),
        None => vec![(0, len)],
    }
}

fn adam_update<T: Scalar>(
    c: AdamConfig,
    t: u64,
    lr: f64,
    store: &mut ParameterStore<T>,
    grads: &GradientSet<T>,
    st: &mut AdamState<T>,
) {
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let bc1 = T::one() - T::of(c.beta1.powi(t as i32));
    let bc2 = T::one() - T::of(c.beta2.powi(t as i32));
    let lr = T::of(lr);
    let eps = T::of(c.epsilon);
    let widths: Vec<(TensorId, usize)> =
        store.tensors().iter().map(|(id, _)| (*id, store.row_width(*id).unwrap_or(1))).collect();
    let g_all = grads.tensors();
    let params = store.tensors_mut();
    let ms = st.m.tensors_mut();
    let vs = st.v.tensors_mut();
    for ((((id, p), (_, m)), (_, v)), ((_, g), (_, w))) in
        params.into_iter().zip(ms).zip(vs).zip(g_all.iter().zip(&widths))
    {
        for (start, len) in visit_ranges(grads, id, p.len(), *w) {
            for i in start..start + len {
                let gi = g[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

fn ftrl_update<T: Scalar>(
    c: FtrlConfig,
    store: &mut ParameterStore<T>,
    grads: &GradientSet<T>,
    st: &mut FtrlState<T>,
) -> Result<()> {
    let alpha = T::of(c.alpha);
    let beta = T::of(c.beta);
    let g_all = grads.tensors();
    for ((((id, p), (_, z)), (_, n)), (gid, g)) in
        store.tensors_mut().into_iter().zip(st.z.tensors_mut()).zip(st.n.tensors_mut()).zip(g_all)
    {
        debug_assert_eq!(id, gid);
        // the global bias is left unregularized
        let (l1, l2) = match id {
            TensorId::Bias => (T::zero(), T::zero()),
            TensorId::Linear => (T::of(c.l1), T::of(c.l2)),
            other => return Err(Error::Config(format!("FTRL cannot update tensor {other}"))),
        };
        for (start, len) in visit_ranges(grads, id, p.len(), 1) {
            for i in start..start + len {
                let gi = g[i];
                let sigma = ((n[i] + gi * gi).sqrt() - n[i].sqrt()) / alpha;
                z[i] += gi - sigma * p[i];
                n[i] += gi * gi;
                p[i] = if z[i].abs() <= l1 {
                    T::zero()
                } else {
                    let sign = if z[i] > T::zero() { T::one() } else { -T::one() };
                    -(z[i] - sign * l1) / ((beta + n[i].sqrt()) / alpha + l2)
                };
            }
        }
    }
    Ok(())
}
