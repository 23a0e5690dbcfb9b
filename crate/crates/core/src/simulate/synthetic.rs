use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurespace::{FeatureSchema, FieldSpec, SparseInstance};
use crate::numerics::{fill_normal, rng_stream, sigmoid};

/// Low-rank interaction between every value pair of two fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPair {
    pub fields: [usize; 2],
    pub weight: f64,
}

/// Rank-`r` three-way interaction between every value triple of three fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTriple {
    pub fields: [usize; 3],
    pub weight: f64,
}

/// A single `(field, value) × (field, value)` cross with a fixed weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturePair {
    pub a: [usize; 2],
    pub b: [usize; 2],
    pub weight: f64,
}

fn default_rank() -> usize {
    4
}

/// Recipe for a labeled dataset with known ground truth.
///
/// Each field takes a uniformly drawn value. The clean logit is
/// `bias + Σ linear + Σ pairs + Σ triples + Σ feature crosses`; labels are
/// Bernoulli of `sigmoid(clean + noise·N(0,1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub cardinalities: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub bias: f64,
    /// Std of the per-feature linear weights.
    #[serde(default)]
    pub linear_std: f64,
    /// Rank of the latent factors behind field pairs and triples.
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default)]
    pub pairs: Vec<FieldPair>,
    #[serde(default)]
    pub triples: Vec<FieldTriple>,
    #[serde(default)]
    pub feature_pairs: Vec<FeaturePair>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    /// `m` fields of equal cardinality and no signal.
    pub fn uniform(m: usize, cardinality: usize, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            cardinalities: vec![cardinality; m],
            n_train,
            n_test,
            bias: 0.0,
            linear_std: 0.0,
            rank: default_rank(),
            pairs: Vec::new(),
            triples: Vec::new(),
            feature_pairs: Vec::new(),
            noise: 0.0,
            seed,
        }
    }

    pub fn num_fields(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn num_features(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_fields();
        let bad = |msg: String| Err(Error::Config(format!("synthetic spec: {msg}")));
        if m == 0 || self.cardinalities.contains(&0) {
            return bad("every field needs at least one value".into());
        }
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if !(self.noise >= 0.0 && self.linear_std >= 0.0) {
            return bad("noise and linear_std must be non-negative".into());
        }
        let distinct = |fs: &[usize]| {
            fs.iter().all(|&f| f < m) && (0..fs.len()).all(|i| (i + 1..fs.len()).all(|j| fs[i] != fs[j]))
        };
        if let Some(p) = self.pairs.iter().find(|p| !distinct(&p.fields)) {
            return bad(format!("pair over fields {:?} is invalid for {m} fields", p.fields));
        }
        if let Some(t) = self.triples.iter().find(|t| !distinct(&t.fields)) {
            return bad(format!("triple over fields {:?} is invalid for {m} fields", t.fields));
        }
        for fp in &self.feature_pairs {
            for [f, v] in [fp.a, fp.b] {
                if f >= m || v >= self.cardinalities[f] {
                    return bad(format!("feature ({f}, {v}) out of range"));
                }
            }
            if fp.a[0] == fp.b[0] {
                return bad("a feature cross needs two different fields".into());
            }
        }
        Ok(())
    }
}

/// Ground-truth parameters drawn from a [`SyntheticSpec`].
#[derive(Debug, Clone)]
pub struct Truth {
    offsets: Vec<usize>,
    linear: Vec<f64>,
    /// Per pair: latent rows for each of its two fields, indexed by value.
    pair_factors: Vec<[Vec<Vec<f64>>; 2]>,
    triple_factors: Vec<[Vec<Vec<f64>>; 3]>,
}

/// A generated dataset plus the scores that produced its labels.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub schema: FeatureSchema,
    pub train: Vec<SparseInstance>,
    pub test: Vec<SparseInstance>,
    /// Noise-free logits: the best score any model of the features can reach.
    pub train_clean: Vec<f64>,
    pub test_clean: Vec<f64>,
    pub truth: Truth,
}

impl SyntheticData {
    pub fn num_fields(&self) -> usize {
        self.spec.num_fields()
    }

    pub fn num_features(&self) -> usize {
        self.spec.num_features()
    }
}

impl Truth {
    fn draw(spec: &SyntheticSpec) -> Self {
        let mut offsets = Vec::with_capacity(spec.num_fields());
        let mut acc = 0;
        for &c in &spec.cardinalities {
            offsets.push(acc);
            acc += c;
        }
        let mut linear = vec![0.0; acc];
        fill_normal(&mut rng_stream(spec.seed, 1), spec.linear_std, &mut linear);
        let mut rng = rng_stream(spec.seed, 2);
        let mut factors = |field: usize| -> Vec<Vec<f64>> {
            (0..spec.cardinalities[field])
                .map(|_| {
                    let mut row = vec![0.0; spec.rank];
                    fill_normal(&mut rng, 1.0, &mut row);
                    row
                })
                .collect()
        };
        let pair_factors = spec.pairs.iter().map(|p| p.fields.map(&mut factors)).collect();
        let triple_factors = spec.triples.iter().map(|t| t.fields.map(&mut factors)).collect();
        Self { offsets, linear, pair_factors, triple_factors }
    }

    /// Noise-free logit of a value assignment.
    pub fn score(&self, spec: &SyntheticSpec, values: &[usize]) -> f64 {
        let r = spec.rank as f64;
        let mut z = spec.bias;
        for (f, &v) in values.iter().enumerate() {
            z += self.linear[self.offsets[f] + v];
        }
        for (p, [fa, fb]) in spec.pairs.iter().zip(&self.pair_factors) {
            let (a, b) = (&fa[values[p.fields[0]]], &fb[values[p.fields[1]]]);
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            z += p.weight * dot / r.sqrt();
        }
        for (t, [fa, fb, fc]) in spec.triples.iter().zip(&self.triple_factors) {
            let (a, b, c) = (&fa[values[t.fields[0]]], &fb[values[t.fields[1]]], &fc[values[t.fields[2]]]);
            let prod: f64 = (0..spec.rank).map(|k| a[k] * b[k] * c[k]).sum();
            z += t.weight * prod / r.sqrt();
        }
        for fp in &spec.feature_pairs {
            if values[fp.a[0]] == fp.a[1] && values[fp.b[0]] == fp.b[1] {
                z += fp.weight;
            }
        }
        z
    }
}

fn schema_for(spec: &SyntheticSpec) -> Result<FeatureSchema> {
    let fields = spec
        .cardinalities
        .iter()
        .enumerate()
        .map(|(f, &c)| {
            let tokens: Vec<String> = (0..c).map(|v| format!("v{v:04}")).collect();
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            FieldSpec::categorical(format!("f{f}"), &refs, false)
        })
        .collect();
    FeatureSchema::from_fields(fields)
}

/// Draws the ground truth and `n_train + n_test` labeled instances.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let truth = Truth::draw(spec);
    let schema = schema_for(spec)?;
    let mut rng = rng_stream(spec.seed, 3);
    let mut draw = |n: usize| {
        let mut insts = Vec::with_capacity(n);
        let mut clean = Vec::with_capacity(n);
        let mut values = vec![0usize; spec.num_fields()];
        for _ in 0..n {
            for (v, &c) in values.iter_mut().zip(&spec.cardinalities) {
                *v = rng.random_range(0..c);
            }
            let z = truth.score(spec, &values);
            let eps: f64 = if spec.noise > 0.0 {
                let mut e = [0.0];
                fill_normal(&mut rng, spec.noise, &mut e);
                e[0]
            } else {
                0.0
            };
            let label = u8::from(rng.random::<f64>() < sigmoid(z + eps));
            insts.push(SparseInstance {
                ids: values.iter().enumerate().map(|(f, &v)| (truth.offsets[f] + v) as u32).collect(),
                values: vec![1.0; values.len()],
                label,
            });
            clean.push(z);
        }
        (insts, clean)
    };
    let (train, train_clean) = draw(spec.n_train);
    let (test, test_clean) = draw(spec.n_test);
    Ok(SyntheticData { spec: spec.clone(), schema, train, test, train_clean, test_clean, truth })
}

/// Raw delimited lines (`label<TAB>token…`) for a set of instances, decodable
/// with the dataset's schema.
pub fn to_raw_lines(data: &SyntheticData, instances: &[SparseInstance]) -> Vec<String> {
    instances
        .iter()
        .map(|inst| {
            let mut line = inst.label.to_string();
            for (f, &id) in inst.ids.iter().enumerate() {
                let v = id as usize - data.truth.offsets[f];
                line.push('\t');
                line.push_str(&format!("v{v:04}"));
            }
            line
        })
        .collect()
}
