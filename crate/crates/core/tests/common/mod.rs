#![allow(dead_code)]

use ctr_core::featurespace::SparseInstance;
use ctr_core::models::{Model, ModelKind, ModelSpec, TensorId};
use ctr_core::numerics::Activation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Field cardinalities for small fixtures; the last field is numerical (one ID).
pub const CARDS: [usize; 4] = [8, 7, 9, 1];

pub fn offsets(cards: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    cards
        .iter()
        .map(|c| {
            let o = acc;
            acc += c;
            o
        })
        .collect()
}

/// Random instances over `cards`; single-ID fields get a real value in [-2, 2].
pub fn random_instances(cards: &[usize], n: usize, seed: u64) -> Vec<SparseInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offs = offsets(cards);
    (0..n)
        .map(|_| {
            let mut ids = Vec::new();
            let mut values = Vec::new();
            for (c, o) in cards.iter().zip(&offs) {
                ids.push((o + rng.random_range(0..*c)) as u32);
                values.push(if *c == 1 { rng.random_range(-2.0f32..2.0) } else { 1.0 });
            }
            SparseInstance { ids, values, label: rng.random_range(0..2u8) }
        })
        .collect()
}

pub fn small_spec(kind: ModelKind) -> ModelSpec {
    let mut spec = ModelSpec::new(kind).with_poly2_bits(6).with_init_std(0.3);
    if kind.has_fm() || kind.has_deep() {
        spec = spec.with_k(3);
    }
    if kind.has_deep() {
        spec = spec.with_hidden(vec![6, 5]).with_activation(Activation::Tanh);
    }
    spec
}

/// Model with every tensor (biases, `w`, pair table, LN params included)
/// randomized, so no gradient is trivially zero.
pub fn randomized_model(spec: ModelSpec, m: usize, d: usize, seed: u64) -> Model<f64> {
    let mut model = Model::<f64>::new(spec, m, d, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for (id, t) in model.store.tensors_mut() {
        for x in t.iter_mut() {
            *x = match id {
                TensorId::LnGain(_) => rng.random_range(0.5..1.5),
                _ => rng.random_range(-0.5..0.5),
            };
        }
    }
    model
}

fn bce(logit: f64, y: u8) -> f64 {
    // log(1 + e^{-z}) for y=1, log(1 + e^{z}) for y=0, in a stable form
    let z = if y == 1 { -logit } else { logit };
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn mean_loss(model: &Model<f64>, batch: &[SparseInstance]) -> f64 {
    let logits = model.logits(batch).unwrap();
    logits.iter().zip(batch).map(|(&z, i)| bce(z, i.label)).sum::<f64>() / batch.len() as f64
}

/// Largest relative error per tensor between the analytic gradient of the
/// mean log-loss and central differences with step `h`.
pub fn gradient_check(model: &Model<f64>, batch: &[SparseInstance], h: f64) -> Vec<(TensorId, f64, usize)> {
    let logits = model.logits(batch).unwrap();
    let n = batch.len() as f64;
    let dlogits: Vec<f64> =
        logits.iter().zip(batch).map(|(&z, i)| (1.0 / (1.0 + (-z).exp()) - f64::from(i.label)) / n).collect();
    let grads = model.backward(batch, &dlogits, None).unwrap();
    let mut report = Vec::new();
    for (id, analytic) in grads.tensors() {
        let mut worst = 0.0f64;
        for j in 0..analytic.len() {
            let mut probe = model.clone();
            probe.store.tensor_mut(id).unwrap()[j] += h;
            let up = mean_loss(&probe, batch);
            probe.store.tensor_mut(id).unwrap()[j] -= 2.0 * h;
            let down = mean_loss(&probe, batch);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
        }
        report.push((id, worst, analytic.len()));
    }
    report
}

/// Order-2 FM term by the literal double loop over field pairs.
pub fn fm_pairwise_naive(model: &Model<f64>, inst: &SparseInstance) -> f64 {
    let v = &model.store.v;
    let m = inst.ids.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let vi = v.row(inst.ids[i] as usize);
            let vj = v.row(inst.ids[j] as usize);
            let mut d = 0.0;
            for f in 0..vi.len() {
                d += vi[f] * vj[f];
            }
            total += d * f64::from(inst.values[i]) * f64::from(inst.values[j]);
        }
    }
    total
}

pub fn all_kinds() -> impl Iterator<Item = ModelKind> {
    ModelKind::ALL.into_iter()
}
