use serde::Serialize;

use super::product::product_len;
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::numerics::{fill_normal, rng_stream, DenseMatrix, Scalar};

/// Names one tensor of a store (and the matching tensor of a gradient set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TensorId {
    /// Global bias `w0`.
    Bias,
    /// Order-1 weights `w`, one per global feature.
    Linear,
    /// FM latent table `V` (also the deep embedding in shared models).
    Latent,
    /// Poly-2 hashed pair weights.
    Pair,
    /// Embedding table owned by the deep component.
    DeepEmbedding,
    /// Product-layer weights feeding the first hidden layer.
    Quadratic,
    /// Weight matrix of dense layer `l`; `l == hidden.len()` is the output projection.
    Weight(usize),
    LayerBias(usize),
    LnGain(usize),
    LnBias(usize),
}

impl TensorId {
    pub fn name(self) -> String {
        match self {
            TensorId::Bias => "w0".into(),
            TensorId::Linear => "w".into(),
            TensorId::Latent => "v".into(),
            TensorId::Pair => "pair".into(),
            TensorId::DeepEmbedding => "embedding".into(),
            TensorId::Quadratic => "quadratic".into(),
            TensorId::Weight(l) => format!("layer{l}.weight"),
            TensorId::LayerBias(l) => format!("layer{l}.bias"),
            TensorId::LnGain(l) => format!("layer{l}.ln_gain"),
            TensorId::LnBias(l) => format!("layer{l}.ln_bias"),
        }
    }

    /// Tensors touched row-by-row from the sparse input.
    pub fn is_sparse(self) -> bool {
        matches!(self, TensorId::Linear | TensorId::Latent | TensorId::Pair | TensorId::DeepEmbedding)
    }

    /// Order-1 and latent parameters of the FM component (the L2 target).
    pub fn is_fm_part(self) -> bool {
        matches!(self, TensorId::Bias | TensorId::Linear | TensorId::Latent)
    }
}

impl std::fmt::Display for TensorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerNormParams<T> {
    pub gain: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseLayer<T> {
    pub weight: DenseMatrix<T>,
    pub bias: Vec<T>,
    pub ln: Option<LayerNormParams<T>>,
}

impl<T: Scalar> DenseLayer<T> {
    fn zeros(out: usize, inp: usize, ln: bool) -> Self {
        Self {
            weight: DenseMatrix::zeros(out, inp),
            bias: vec![T::zero(); out],
            ln: ln.then(|| LayerNormParams { gain: vec![T::one(); out], bias: vec![T::zero(); out] }),
        }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeepParams<T> {
    /// Own embedding table; `None` when the deep part reads the FM table.
    pub embedding: Option<DenseMatrix<T>>,
    /// `W_quadratic` of the product layer; the first hidden layer's weight is `W_linear`.
    pub quadratic: Option<DenseMatrix<T>>,
    pub hidden: Vec<DenseLayer<T>>,
    /// `1 × last_width` projection to the scalar deep output.
    pub output: DenseLayer<T>,
}

/// Every trainable tensor of one model.
///
/// Tensors a model kind does not use are left empty (zero length), so the
/// same layout serves every kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterStore<T> {
    pub w0: T,
    pub w: Vec<T>,
    pub v: DenseMatrix<T>,
    pub pair: Vec<T>,
    pub deep: Option<DeepParams<T>>,
}

impl<T: Scalar> ParameterStore<T> {
    /// All-zero store shaped for `spec` over `m` fields and `d` features; LN gains are one.
    pub fn zeros(spec: &ModelSpec, m: usize, d: usize) -> Result<Self> {
        spec.validate()?;
        if m == 0 || d == 0 {
            return Err(Error::Config("a model needs at least one field and one feature".into()));
        }
        let kind = spec.kind;
        let w = if kind.has_linear() { vec![T::zero(); d] } else { Vec::new() };
        let v = if kind.has_fm() { DenseMatrix::zeros(d, spec.k) } else { DenseMatrix::zeros(0, 0) };
        let pair = if kind.has_poly2() { vec![T::zero(); 1usize << spec.poly2_table_bits] } else { Vec::new() };
        let deep = kind.has_deep().then(|| {
            let kp = spec.deep_embedding_width();
            let embedding = (!spec.shared_embedding()).then(|| DenseMatrix::zeros(d, kp));
            let quadratic =
                spec.product().map(|p| DenseMatrix::zeros(spec.hidden[0], product_len(p, spec.outer, m, kp)));
            let mut hidden = Vec::with_capacity(spec.hidden.len());
            let mut inp = m * kp;
            for &h in &spec.hidden {
                hidden.push(DenseLayer::zeros(h, inp, spec.layer_norm));
                inp = h;
            }
            DeepParams { embedding, quadratic, hidden, output: DenseLayer::zeros(1, inp, false) }
        });
        Ok(Self { w0: T::zero(), w, v, pair, deep })
    }

    /// Store with the standard init: latent tables and dense weights drawn
    /// from `Normal(0, init_std)`, everything else zero (LN gains one).
    pub fn init(spec: &ModelSpec, m: usize, d: usize, seed: u64) -> Result<Self> {
        let mut store = Self::zeros(spec, m, d)?;
        for (stream, (id, data)) in store.tensors_mut().into_iter().enumerate() {
            let random =
                matches!(id, TensorId::Latent | TensorId::DeepEmbedding | TensorId::Quadratic | TensorId::Weight(_));
            if random {
                fill_normal(&mut rng_stream(seed, stream as u64), spec.init_std, data);
            }
        }
        Ok(store)
    }

    /// Tensors in declaration order, skipping empty ones.
    pub fn tensors(&self) -> Vec<(TensorId, &[T])> {
        let mut out: Vec<(TensorId, &[T])> = vec![(TensorId::Bias, std::slice::from_ref(&self.w0))];
        out.push((TensorId::Linear, &self.w));
        out.push((TensorId::Latent, self.v.as_slice()));
        out.push((TensorId::Pair, &self.pair));
        if let Some(deep) = &self.deep {
            if let Some(e) = &deep.embedding {
                out.push((TensorId::DeepEmbedding, e.as_slice()));
            }
            if let Some(q) = &deep.quadratic {
                out.push((TensorId::Quadratic, q.as_slice()));
            }
            for (l, layer) in deep.hidden.iter().chain(std::iter::once(&deep.output)).enumerate() {
                out.push((TensorId::Weight(l), layer.weight.as_slice()));
                out.push((TensorId::LayerBias(l), &layer.bias));
                if let Some(ln) = &layer.ln {
                    out.push((TensorId::LnGain(l), &ln.gain));
                    out.push((TensorId::LnBias(l), &ln.bias));
                }
            }
        }
        out.retain(|(_, t)| !t.is_empty());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(TensorId, &mut [T])> {
        let mut out: Vec<(TensorId, &mut [T])> = vec![(TensorId::Bias, std::slice::from_mut(&mut self.w0))];
        out.push((TensorId::Linear, &mut self.w));
        out.push((TensorId::Latent, self.v.as_mut_slice()));
        out.push((TensorId::Pair, &mut self.pair));
        if let Some(deep) = &mut self.deep {
            if let Some(e) = &mut deep.embedding {
                out.push((TensorId::DeepEmbedding, e.as_mut_slice()));
            }
            if let Some(q) = &mut deep.quadratic {
                out.push((TensorId::Quadratic, q.as_mut_slice()));
            }
            for (l, layer) in deep.hidden.iter_mut().chain(std::iter::once(&mut deep.output)).enumerate() {
                out.push((TensorId::Weight(l), layer.weight.as_mut_slice()));
                out.push((TensorId::LayerBias(l), &mut layer.bias));
                if let Some(ln) = &mut layer.ln {
                    out.push((TensorId::LnGain(l), &mut ln.gain));
                    out.push((TensorId::LnBias(l), &mut ln.bias));
                }
            }
        }
        out.retain(|(_, t)| !t.is_empty());
        out
    }

    pub fn tensor(&self, id: TensorId) -> Option<&[T]> {
        self.tensors().into_iter().find(|(t, _)| *t == id).map(|(_, d)| d)
    }

    pub fn tensor_mut(&mut self, id: TensorId) -> Option<&mut [T]> {
        self.tensors_mut().into_iter().find(|(t, _)| *t == id).map(|(_, d)| d)
    }

    /// Row width of a sparse tensor.
    pub fn row_width(&self, id: TensorId) -> Option<usize> {
        match id {
            TensorId::Linear | TensorId::Pair => Some(1),
            TensorId::Latent => Some(self.v.cols()),
            TensorId::DeepEmbedding => self.deep.as_ref()?.embedding.as_ref().map(|e| e.cols()),
            _ => None,
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// First tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<TensorId> {
        self.tensors().into_iter().find(|(_, t)| t.iter().any(|x| !x.is_finite())).map(|(id, _)| id)
    }

    /// Sets every deep-component tensor to zero (own embedding included).
    pub fn zero_deep(&mut self) {
        for (id, t) in self.tensors_mut() {
            if !matches!(id, TensorId::Bias | TensorId::Linear | TensorId::Latent | TensorId::Pair) {
                t.iter_mut().for_each(|x| *x = T::zero());
            }
        }
    }

    /// Sets `w0`, `w`, `V` and the pair table to zero.
    pub fn zero_wide(&mut self) {
        for (id, t) in self.tensors_mut() {
            if matches!(id, TensorId::Bias | TensorId::Linear | TensorId::Latent | TensorId::Pair) {
                t.iter_mut().for_each(|x| *x = T::zero());
            }
        }
    }
}

/// Membership set over the rows of one sparse tensor, in first-touch order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowSet {
    rows: Vec<u32>,
    mark: Vec<bool>,
}

impl RowSet {
    fn new(n: usize) -> Self {
        Self { rows: Vec::new(), mark: vec![false; n] }
    }

    #[inline]
    pub fn insert(&mut self, r: usize) {
        if !self.mark[r] {
            self.mark[r] = true;
            self.rows.push(r as u32);
        }
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn contains(&self, r: usize) -> bool {
        self.mark.get(r).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn clear(&mut self) {
        for &r in &self.rows {
            self.mark[r as usize] = false;
        }
        self.rows.clear();
    }
}

/// Gradients shaped exactly like a [`ParameterStore`], with the set of
/// touched rows recorded for each sparse tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub grads: ParameterStore<T>,
    pub touched_w: RowSet,
    pub touched_v: RowSet,
    pub touched_pair: RowSet,
    pub touched_embedding: RowSet,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(store: &ParameterStore<T>) -> Self {
        let mut grads = store.clone();
        for (_, t) in grads.tensors_mut() {
            t.iter_mut().for_each(|x| *x = T::zero());
        }
        let emb_rows = store.deep.as_ref().and_then(|d| d.embedding.as_ref()).map_or(0, |e| e.rows());
        Self {
            touched_w: RowSet::new(store.w.len()),
            touched_v: RowSet::new(store.v.rows()),
            touched_pair: RowSet::new(store.pair.len()),
            touched_embedding: RowSet::new(emb_rows),
            grads,
        }
    }

    pub fn tensors(&self) -> Vec<(TensorId, &[T])> {
        self.grads.tensors()
    }

    pub fn tensor(&self, id: TensorId) -> Option<&[T]> {
        self.grads.tensor(id)
    }

    /// Rows with (possibly) nonzero gradient; `None` for dense tensors.
    pub fn touched(&self, id: TensorId) -> Option<&[u32]> {
        match id {
            TensorId::Linear => Some(self.touched_w.rows()),
            TensorId::Latent => Some(self.touched_v.rows()),
            TensorId::Pair => Some(self.touched_pair.rows()),
            TensorId::DeepEmbedding => Some(self.touched_embedding.rows()),
            _ => None,
        }
    }

    fn touched_mut(&mut self, id: TensorId) -> Option<&mut RowSet> {
        match id {
            TensorId::Linear => Some(&mut self.touched_w),
            TensorId::Latent => Some(&mut self.touched_v),
            TensorId::Pair => Some(&mut self.touched_pair),
            TensorId::DeepEmbedding => Some(&mut self.touched_embedding),
            _ => None,
        }
    }

    /// Resets to zero, visiting only touched rows of sparse tensors.
    pub fn clear(&mut self) {
        let touched = [
            (TensorId::Linear, std::mem::take(&mut self.touched_w)),
            (TensorId::Latent, std::mem::take(&mut self.touched_v)),
            (TensorId::Pair, std::mem::take(&mut self.touched_pair)),
            (TensorId::DeepEmbedding, std::mem::take(&mut self.touched_embedding)),
        ];
        let widths: Vec<_> = touched.iter().map(|(id, _)| self.grads.row_width(*id).unwrap_or(1)).collect();
        for (id, t) in self.grads.tensors_mut() {
            match touched.iter().position(|(s, _)| *s == id) {
                Some(i) => {
                    let w = widths[i];
                    for &r in touched[i].1.rows() {
                        let r = r as usize;
                        t[r * w..(r + 1) * w].iter_mut().for_each(|x| *x = T::zero());
                    }
                }
                None => t.iter_mut().for_each(|x| *x = T::zero()),
            }
        }
        let [mut a, mut b, mut c, mut d] = touched.map(|(_, s)| s);
        for s in [&mut a, &mut b, &mut c, &mut d] {
            s.clear();
        }
        self.touched_w = a;
        self.touched_v = b;
        self.touched_pair = c;
        self.touched_embedding = d;
    }

    /// `self += other`, tensor by tensor. Sparse tensors add touched rows only.
    pub fn accumulate(&mut self, other: &GradientSet<T>) -> Result<()> {
        let ours: Vec<(TensorId, usize)> = self.tensors().iter().map(|(id, t)| (*id, t.len())).collect();
        let theirs: Vec<(TensorId, usize)> = other.tensors().iter().map(|(id, t)| (*id, t.len())).collect();
        if ours != theirs {
            return Err(Error::dim("gradient accumulation", format!("{ours:?}"), format!("{theirs:?}")));
        }
        for id in [TensorId::Linear, TensorId::Latent, TensorId::Pair, TensorId::DeepEmbedding] {
            if let Some(rows) = other.touched(id) {
                let set = self.touched_mut(id).expect("sparse tensor");
                for &r in rows {
                    set.insert(r as usize);
                }
            }
        }
        let src = other.tensors();
        for ((id, dst), (_, s)) in self.grads.tensors_mut().into_iter().zip(src) {
            match other.touched(id) {
                Some(rows) => {
                    let w = other.grads.row_width(id).unwrap_or(1);
                    for &r in rows {
                        let r = r as usize;
                        for (a, b) in dst[r * w..(r + 1) * w].iter_mut().zip(&s[r * w..(r + 1) * w]) {
                            *a += *b;
                        }
                    }
                }
                None => dst.iter_mut().zip(s).for_each(|(a, b)| *a += *b),
            }
        }
        Ok(())
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: T) {
        let rows: Vec<(TensorId, Vec<u32>)> =
            [TensorId::Linear, TensorId::Latent, TensorId::Pair, TensorId::DeepEmbedding]
                .into_iter()
                .filter_map(|id| self.touched(id).map(|r| (id, r.to_vec())))
                .collect();
        let widths: Vec<usize> = rows.iter().map(|(id, _)| self.grads.row_width(*id).unwrap_or(1)).collect();
        for (id, t) in self.grads.tensors_mut() {
            match rows.iter().position(|(s, _)| *s == id) {
                Some(i) => {
                    let w = widths[i];
                    for &r in &rows[i].1 {
                        let r = r as usize;
                        t[r * w..(r + 1) * w].iter_mut().for_each(|x| *x *= factor);
                    }
                }
                None => t.iter_mut().for_each(|x| *x *= factor),
            }
        }
    }

    pub fn first_non_finite(&self) -> Option<TensorId> {
        self.grads.first_non_finite()
    }

    /// Adds `alpha · x` to row `r` of sparse tensor `id` and marks it touched.
    #[inline]
    pub(crate) fn add_row(&mut self, id: TensorId, r: usize, alpha: T, x: &[T]) {
        match id {
            TensorId::Linear => {
                self.touched_w.insert(r);
                self.grads.w[r] += alpha * x[0];
            }
            TensorId::Pair => {
                self.touched_pair.insert(r);
                self.grads.pair[r] += alpha * x[0];
            }
            TensorId::Latent => {
                self.touched_v.insert(r);
                crate::numerics::axpy(alpha, x, self.grads.v.row_mut(r));
            }
            TensorId::DeepEmbedding => {
                self.touched_embedding.insert(r);
                let e = self.grads.deep.as_mut().and_then(|d| d.embedding.as_mut()).expect("deep embedding gradient");
                crate::numerics::axpy(alpha, x, e.row_mut(r));
            }
            _ => unreachable!("{id} is dense"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::spec::{ModelKind, ModelSpec};

    #[test]
    fn gradient_set_mirrors_store() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind).with_hidden(if kind.has_deep() { vec![5, 4] } else { vec![] });
            let spec = if kind.has_fm() || kind.has_deep() { spec.with_k(3) } else { spec };
            let spec = spec.with_poly2_bits(6).with_layer_norm(kind.has_deep());
            let store = ParameterStore::<f64>::init(&spec, 4, 20, 1).unwrap();
            let grads = GradientSet::zeros_like(&store);
            let a: Vec<_> = store.tensors().iter().map(|(id, t)| (*id, t.len())).collect();
            let b: Vec<_> = grads.tensors().iter().map(|(id, t)| (*id, t.len())).collect();
            assert_eq!(a, b, "{kind}");
            assert!(grads.tensors().iter().all(|(_, t)| t.iter().all(|&x| x == 0.0)));
        }
    }

    #[test]
    fn init_is_seeded_and_follows_the_zero_rules() {
        let spec = ModelSpec::new(ModelKind::DeepFmD).with_k(4).with_hidden(vec![8]);
        let a = ParameterStore::<f64>::init(&spec, 3, 30, 5).unwrap();
        assert_eq!(a, ParameterStore::init(&spec, 3, 30, 5).unwrap());
        assert_ne!(a, ParameterStore::init(&spec, 3, 30, 6).unwrap());
        assert!(a.w.iter().all(|&x| x == 0.0));
        assert_eq!(a.w0, 0.0);
        assert!(a.v.as_slice().iter().any(|&x| x != 0.0));
        let deep = a.deep.as_ref().unwrap();
        assert!(deep.embedding.is_none());
        assert!(deep.hidden[0].bias.iter().all(|&x| x == 0.0));
        assert_eq!(deep.hidden[0].weight.shape(), (8, 12));
        assert_eq!(deep.output.weight.shape(), (1, 8));
    }

    #[test]
    fn accumulate_and_clear_respect_touched_rows() {
        let spec = ModelSpec::new(ModelKind::Fm).with_k(2);
        let store = ParameterStore::<f64>::zeros(&spec, 2, 5).unwrap();
        let mut a = GradientSet::zeros_like(&store);
        let mut b = GradientSet::zeros_like(&store);
        b.add_row(TensorId::Latent, 3, 2.0, &[1.0, -1.0]);
        b.add_row(TensorId::Linear, 1, 1.0, &[0.5]);
        b.grads.w0 = 1.5;
        a.accumulate(&b).unwrap();
        a.accumulate(&b).unwrap();
        assert_eq!(a.grads.v.row(3), &[4.0, -4.0]);
        assert_eq!(a.grads.w[1], 1.0);
        assert_eq!(a.grads.w0, 3.0);
        assert_eq!(a.touched(TensorId::Latent).unwrap(), &[3]);
        a.scale(0.5);
        assert_eq!(a.grads.v.row(3), &[2.0, -2.0]);
        a.clear();
        assert!(a.tensors().iter().all(|(_, t)| t.iter().all(|&x| x == 0.0)));
        assert!(a.touched(TensorId::Latent).unwrap().is_empty());
    }
}
