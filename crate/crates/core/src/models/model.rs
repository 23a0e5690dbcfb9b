use serde::Serialize;

use super::product::{product_backward, product_forward};
use super::spec::{ModelKind, ModelSpec};
use super::store::{GradientSet, ParameterStore, TensorId};
use crate::error::{Error, Result};
use crate::featurespace::SparseInstance;
use crate::numerics::{
    derive_seed, dot, fill_dropout_mask, layer_norm_backward, layer_norm_into, rng_stream, sigmoid, LayerNormCache,
    Scalar,
};

/// Poly-2 slot of an unordered feature pair: multiply-shift hash of the
/// sorted 64-bit key into `2^bits` slots.
#[inline]
pub fn pair_slot(a: u32, b: u32, bits: u32) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let key = ((lo as u64) << 32) | hi as u64;
    (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (64 - bits)) as usize
}

/// Additive pieces of one logit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Parts<T> {
    /// `w0 + ⟨w, x⟩`
    pub linear: T,
    /// FM inner products or Poly-2 pair terms.
    pub pairwise: T,
    /// Output of the deep component.
    pub deep: T,
}

impl<T: Scalar> Parts<T> {
    pub fn logit(&self) -> T {
        self.linear + self.pairwise + self.deep
    }
}

/// Seeds training-time dropout. Instance `i` of a batch draws its masks from
/// `derive_seed(seed, [first_index + i])`, so a batch split across workers
/// reproduces the masks of the unsplit batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dropout {
    pub seed: u64,
    pub first_index: u64,
}

/// A model: its spec, input geometry and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub num_fields: usize,
    pub num_features: usize,
    pub store: ParameterStore<T>,
}

/// Per-thread scratch space holding one instance's forward cache.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    fm_sum: Vec<T>,
    emb: Vec<T>,
    prod: Vec<T>,
    field_sum: Vec<T>,
    pre: Vec<Vec<T>>,
    normed: Vec<Vec<T>>,
    ln: Vec<LayerNormCache<T>>,
    act: Vec<Vec<T>>,
    mask: Vec<Vec<T>>,
    dropout_on: bool,
    d_h: Vec<T>,
    d_n: Vec<T>,
    d_z: Vec<T>,
    d_in: Vec<T>,
    d_emb: Vec<T>,
    d_prod: Vec<T>,
}

impl<T: Scalar> Model<T> {
    /// Initialized model over `num_fields` fields and `num_features` global features.
    pub fn new(spec: ModelSpec, num_fields: usize, num_features: usize, seed: u64) -> Result<Self> {
        let store = ParameterStore::init(&spec, num_fields, num_features, seed)?;
        Ok(Self { spec, num_fields, num_features, store })
    }

    /// Wraps an existing store after checking its shapes against the spec.
    pub fn from_store(
        spec: ModelSpec,
        num_fields: usize,
        num_features: usize,
        store: ParameterStore<T>,
    ) -> Result<Self> {
        let expected = ParameterStore::<T>::zeros(&spec, num_fields, num_features)?;
        let want: Vec<_> = expected.tensors().iter().map(|(id, t)| (*id, t.len())).collect();
        let got: Vec<_> = store.tensors().iter().map(|(id, t)| (*id, t.len())).collect();
        if want != got {
            return Err(Error::dim("parameter store", format!("{want:?}"), format!("{got:?}")));
        }
        Ok(Self { spec, num_fields, num_features, store })
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn workspace(&self) -> Workspace<T> {
        let layers = self.spec.hidden.len();
        Workspace {
            pre: vec![Vec::new(); layers],
            normed: vec![Vec::new(); layers],
            ln: vec![LayerNormCache::default(); layers],
            act: vec![Vec::new(); layers],
            mask: vec![Vec::new(); layers],
            ..Workspace::default()
        }
    }

    pub fn zero_gradients(&self) -> GradientSet<T> {
        GradientSet::zeros_like(&self.store)
    }

    pub fn check_instance(&self, inst: &SparseInstance) -> Result<()> {
        if inst.ids.len() != self.num_fields || inst.values.len() != self.num_fields {
            return Err(Error::dim(
                "instance fields",
                self.num_fields,
                format!("{} ids / {} values", inst.ids.len(), inst.values.len()),
            ));
        }
        if let Some(&id) = inst.ids.iter().find(|&&id| id as usize >= self.num_features) {
            return Err(Error::Index { what: "feature", index: id as usize, bound: self.num_features });
        }
        Ok(())
    }

    /// Inference logits (no dropout).
    pub fn logits(&self, batch: &[SparseInstance]) -> Result<Vec<T>> {
        let mut ws = self.workspace();
        batch
            .iter()
            .map(|inst| {
                self.check_instance(inst)?;
                Ok(self.forward_instance(inst, None, &mut ws).logit())
            })
            .collect()
    }

    /// Inference probabilities `sigmoid(logit)`.
    pub fn predict(&self, batch: &[SparseInstance]) -> Result<Vec<T>> {
        Ok(self.logits(batch)?.into_iter().map(sigmoid).collect())
    }

    /// Logit decomposed into its components.
    pub fn parts(&self, inst: &SparseInstance) -> Result<Parts<T>> {
        self.check_instance(inst)?;
        Ok(self.forward_instance(inst, None, &mut self.workspace()))
    }

    /// Field embeddings `e_i = x_i · E[id_i]` from the table the model's
    /// embedding layer reads (the deep table if any, else `V`).
    pub fn embed(&self, inst: &SparseInstance) -> Result<Vec<Vec<T>>> {
        self.check_instance(inst)?;
        let table = self.store.deep.as_ref().and_then(|d| d.embedding.as_ref()).unwrap_or(&self.store.v);
        if table.rows() == 0 {
            return Err(Error::Config(format!("{} has no embedding layer", self.kind())));
        }
        Ok(inst
            .ids
            .iter()
            .zip(&inst.values)
            .map(|(&id, &x)| table.row(id as usize).iter().map(|&v| v * T::of(f64::from(x))).collect())
            .collect())
    }

    /// Gradient of `Σ_n dlogits[n] · logit_n` with respect to every tensor.
    /// With `dropout`, the forward pass is replayed under the same masks.
    pub fn backward(
        &self,
        batch: &[SparseInstance],
        dlogits: &[T],
        dropout: Option<Dropout>,
    ) -> Result<GradientSet<T>> {
        if batch.len() != dlogits.len() {
            return Err(Error::dim("backward", batch.len(), dlogits.len()));
        }
        let mut ws = self.workspace();
        let mut grads = self.zero_gradients();
        for (n, (inst, &g)) in batch.iter().zip(dlogits).enumerate() {
            self.check_instance(inst)?;
            self.forward_instance(inst, self.instance_seed(dropout, n), &mut ws);
            self.backward_instance(inst, g, &mut ws, &mut grads);
        }
        Ok(grads)
    }

    /// One fused pass over `batch`: forward, `(loss, dlogit) = loss_fn(logit, label)`,
    /// backward. Gradients are summed into `grads` (not averaged); returns the
    /// summed loss. Instances are assumed already validated.
    pub fn accumulate_gradients<F>(
        &self,
        batch: &[SparseInstance],
        dropout: Option<Dropout>,
        mut loss_fn: F,
        ws: &mut Workspace<T>,
        grads: &mut GradientSet<T>,
    ) -> T
    where
        F: FnMut(T, u8) -> (T, T),
    {
        let mut total = T::zero();
        for (n, inst) in batch.iter().enumerate() {
            let logit = self.forward_instance(inst, self.instance_seed(dropout, n), ws).logit();
            let (loss, g) = loss_fn(logit, inst.label);
            total += loss;
            self.backward_instance(inst, g, ws, grads);
        }
        total
    }

    fn instance_seed(&self, dropout: Option<Dropout>, n: usize) -> Option<u64> {
        match dropout {
            Some(d) if self.spec.keep_prob < 1.0 && self.kind().has_deep() => {
                Some(derive_seed(d.seed, &[d.first_index + n as u64]))
            }
            _ => None,
        }
    }

    /// Forward pass over one instance, caching what backprop needs in `ws`.
    pub(crate) fn forward_instance(
        &self,
        inst: &SparseInstance,
        dropout_seed: Option<u64>,
        ws: &mut Workspace<T>,
    ) -> Parts<T> {
        let s = &self.store;
        let kind = self.kind();
        let mut parts = Parts::default();
        if kind.has_linear() {
            let mut acc = s.w0;
            for (&id, &x) in inst.ids.iter().zip(&inst.values) {
                acc += s.w[id as usize] * T::of(f64::from(x));
            }
            parts.linear = acc;
        }
        if kind.has_poly2() {
            let bits = self.spec.poly2_table_bits;
            let mut acc = T::zero();
            let m = inst.ids.len();
            for i in 0..m {
                for j in i + 1..m {
                    let xij = T::of(f64::from(inst.values[i]) * f64::from(inst.values[j]));
                    acc += s.pair[pair_slot(inst.ids[i], inst.ids[j], bits)] * xij;
                }
            }
            parts.pairwise = acc;
        }
        if kind.has_fm() {
            let k = self.spec.k;
            ws.fm_sum.clear();
            ws.fm_sum.resize(k, T::zero());
            let mut squares = T::zero();
            for (&id, &x) in inst.ids.iter().zip(&inst.values) {
                let x = T::of(f64::from(x));
                for (acc, &v) in ws.fm_sum.iter_mut().zip(s.v.row(id as usize)) {
                    let t = v * x;
                    *acc += t;
                    squares += t * t;
                }
            }
            let sum_sq: T = ws.fm_sum.iter().map(|&t| t * t).sum();
            parts.pairwise = T::of(0.5) * (sum_sq - squares);
        }
        if s.deep.is_some() {
            parts.deep = self.deep_forward(inst, dropout_seed, ws);
        }
        parts
    }

    fn deep_forward(&self, inst: &SparseInstance, dropout_seed: Option<u64>, ws: &mut Workspace<T>) -> T {
        let s = &self.store;
        let deep = s.deep.as_ref().expect("deep component");
        let table = deep.embedding.as_ref().unwrap_or(&s.v);
        let kp = table.cols();
        let m = inst.ids.len();
        ws.emb.clear();
        for (&id, &x) in inst.ids.iter().zip(&inst.values) {
            let x = T::of(f64::from(x));
            ws.emb.extend(table.row(id as usize).iter().map(|&v| v * x));
        }
        if let Some(p) = self.spec.product() {
            product_forward(p, self.spec.outer, &ws.emb, m, kp, &mut ws.prod, &mut ws.field_sum);
        }
        let mut rng = dropout_seed.map(|seed| rng_stream(seed, 0));
        ws.dropout_on = rng.is_some();
        let eps = T::of(self.spec.ln_epsilon);
        let act_fn = self.spec.activation;
        for (l, layer) in deep.hidden.iter().enumerate() {
            let width = layer.width();
            let input: &[T] = if l == 0 { &ws.emb } else { &ws.act[l - 1] };
            let z = &mut ws.pre[l];
            z.resize(width, T::zero());
            layer.weight.matvec_bias(input, &layer.bias, z);
            if l == 0 {
                if let Some(q) = &deep.quadratic {
                    q.matvec_acc(&ws.prod, z);
                }
            }
            let n = &mut ws.normed[l];
            n.resize(width, T::zero());
            match &layer.ln {
                Some(ln) => layer_norm_into(&ws.pre[l], &ln.gain, &ln.bias, eps, n, &mut ws.ln[l]),
                None => n.copy_from_slice(&ws.pre[l]),
            }
            let a = &mut ws.act[l];
            a.clear();
            a.extend(n.iter().map(|&v| act_fn.apply(v)));
            if let Some(rng) = rng.as_mut() {
                let mask = &mut ws.mask[l];
                mask.resize(width, T::one());
                fill_dropout_mask(self.spec.keep_prob, rng, mask);
                for (v, k) in a.iter_mut().zip(mask.iter()) {
                    *v *= *k;
                }
            }
        }
        let last = &ws.act[deep.hidden.len() - 1];
        dot(deep.output.weight.row(0), last) + deep.output.bias[0]
    }

    /// Backprop of `g · logit` for the instance whose forward pass is cached in `ws`.
    pub(crate) fn backward_instance(
        &self,
        inst: &SparseInstance,
        g: T,
        ws: &mut Workspace<T>,
        grads: &mut GradientSet<T>,
    ) {
        let s = &self.store;
        let kind = self.kind();
        if kind.has_linear() {
            grads.grads.w0 += g;
            for (&id, &x) in inst.ids.iter().zip(&inst.values) {
                grads.add_row(TensorId::Linear, id as usize, g, &[T::of(f64::from(x))]);
            }
        }
        if kind.has_poly2() {
            let bits = self.spec.poly2_table_bits;
            let m = inst.ids.len();
            for i in 0..m {
                for j in i + 1..m {
                    let xij = T::of(f64::from(inst.values[i]) * f64::from(inst.values[j]));
                    grads.add_row(TensorId::Pair, pair_slot(inst.ids[i], inst.ids[j], bits), g, &[xij]);
                }
            }
        }
        if kind.has_fm() {
            // ∂/∂v_if = x_i (Σ_j v_jf x_j − v_if x_i)
            let mut row = vec![T::zero(); self.spec.k];
            for (&id, &x) in inst.ids.iter().zip(&inst.values) {
                let x = T::of(f64::from(x));
                for ((r, &sum), &v) in row.iter_mut().zip(&ws.fm_sum).zip(s.v.row(id as usize)) {
                    *r = x * (sum - v * x);
                }
                grads.add_row(TensorId::Latent, id as usize, g, &row);
            }
        }
        if s.deep.is_some() {
            self.deep_backward(inst, g, ws, grads);
        }
    }

    fn deep_backward(&self, inst: &SparseInstance, g: T, ws: &mut Workspace<T>, grads: &mut GradientSet<T>) {
        let s = &self.store;
        let deep = s.deep.as_ref().expect("deep component");
        let gd = grads.grads.deep.as_mut().expect("deep gradients");
        let layers = deep.hidden.len();
        let act_fn = self.spec.activation;

        // output projection
        let last = &ws.act[layers - 1];
        crate::numerics::axpy(g, last, gd.output.weight.row_mut(0));
        gd.output.bias[0] += g;
        ws.d_h.clear();
        ws.d_h.extend(deep.output.weight.row(0).iter().map(|&w| w * g));

        for l in (0..layers).rev() {
            let layer = &deep.hidden[l];
            let glayer = &mut gd.hidden[l];
            if ws.dropout_on {
                for (d, k) in ws.d_h.iter_mut().zip(&ws.mask[l]) {
                    *d *= *k;
                }
            }
            ws.d_n.clear();
            ws.d_n.extend(ws.d_h.iter().zip(&ws.normed[l]).map(|(&d, &n)| d * act_fn.derivative(n)));
            ws.d_z.resize(ws.d_n.len(), T::zero());
            match (&layer.ln, &mut glayer.ln) {
                (Some(ln), Some(gln)) => {
                    layer_norm_backward(&ws.d_n, &ln.gain, &ws.ln[l], &mut ws.d_z, &mut gln.gain, &mut gln.bias)
                }
                _ => ws.d_z.copy_from_slice(&ws.d_n),
            }
            let input: &[T] = if l == 0 { &ws.emb } else { &ws.act[l - 1] };
            glayer.weight.add_outer(T::one(), &ws.d_z, input);
            for (b, d) in glayer.bias.iter_mut().zip(&ws.d_z) {
                *b += *d;
            }
            ws.d_in.clear();
            ws.d_in.resize(input.len(), T::zero());
            layer.weight.matvec_transpose_acc(&ws.d_z, &mut ws.d_in);
            if l == 0 {
                if let (Some(q), Some(gq)) = (&deep.quadratic, &mut gd.quadratic) {
                    gq.add_outer(T::one(), &ws.d_z, &ws.prod);
                    ws.d_prod.clear();
                    ws.d_prod.resize(ws.prod.len(), T::zero());
                    q.matvec_transpose_acc(&ws.d_z, &mut ws.d_prod);
                }
            }
            std::mem::swap(&mut ws.d_h, &mut ws.d_in);
        }
        // ws.d_h now holds ∂/∂emb from the linear path
        std::mem::swap(&mut ws.d_emb, &mut ws.d_h);
        let table = deep.embedding.as_ref().unwrap_or(&s.v);
        let kp = table.cols();
        let m = inst.ids.len();
        if let Some(p) = self.spec.product() {
            product_backward(p, self.spec.outer, &ws.emb, m, kp, &ws.field_sum, &ws.d_prod, &mut ws.d_emb);
        }
        let target = if deep.embedding.is_some() { TensorId::DeepEmbedding } else { TensorId::Latent };
        for (i, (&id, &x)) in inst.ids.iter().zip(&inst.values).enumerate() {
            grads.add_row(target, id as usize, T::of(f64::from(x)), &ws.d_emb[i * kp..(i + 1) * kp]);
        }
    }
}

/// FNN built on a trained FM: embedding row `i` becomes `[V_i ; w_i]`;
/// deep layers are freshly initialized from `seed`.
pub fn pretrain_fnn<T: Scalar>(fm: &Model<T>, spec: ModelSpec, seed: u64) -> Result<Model<T>> {
    if fm.kind() != ModelKind::Fm {
        return Err(Error::Config(format!("FNN pre-training needs an FM model, got {}", fm.kind())));
    }
    if spec.kind != ModelKind::Fnn {
        return Err(Error::Config(format!("pre-training target must be fnn, got {}", spec.kind)));
    }
    if spec.k != fm.spec.k {
        return Err(Error::dim("FNN embedding size k", fm.spec.k, spec.k));
    }
    let mut fnn = Model::new(spec, fm.num_fields, fm.num_features, seed)?;
    let k = fm.spec.k;
    let table = fnn.store.deep.as_mut().and_then(|d| d.embedding.as_mut()).expect("fnn embedding");
    for i in 0..fm.num_features {
        let row = table.row_mut(i);
        row[..k].copy_from_slice(fm.store.v.row(i));
        row[k] = fm.store.w[i];
    }
    Ok(fnn)
}
