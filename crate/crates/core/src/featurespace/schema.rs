use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::raw::RawRecord;
use super::SparseInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Categorical,
    Numerical,
}

/// How a numerical field enters the sparse space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum NumericPolicy {
    /// One shared global ID; the (optionally standardized) value is the feature value.
    Retain { standardize: bool },
    /// One global ID per bucket, value 1. Bucket `b` holds `boundaries[b-1] <= x < boundaries[b]`.
    Discretize { boundaries: Vec<f64> },
}

/// Per-field declaration handed to [`FeatureSchema::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum FieldDecl {
    Categorical,
    /// Keep the raw value.
    Retain,
    /// Keep the value, z-scored with training statistics.
    Standardize,
    /// Discretize at quantiles of the training data into at most `n` buckets.
    Quantiles(usize),
    /// Discretize at explicit, strictly increasing boundaries.
    Boundaries(Vec<f64>),
}

impl FieldDecl {
    pub fn kind(&self) -> FieldKind {
        match self {
            FieldDecl::Categorical => FieldKind::Categorical,
            _ => FieldKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Number of local indices `n_k`, including the unknown slot when reserved.
    pub cardinality: u32,
    /// Raw token → local index (categorical only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vocab: BTreeMap<String, u32>,
    /// Local index that unseen tokens map to (categorical only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<NumericPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<NumericStats>,
}

impl FieldSpec {
    /// Categorical field with an explicit vocabulary. Indices must be dense in `[0, len)`.
    pub fn categorical(name: impl Into<String>, tokens: &[&str], reserve_unknown: bool) -> Self {
        let vocab: BTreeMap<String, u32> = tokens.iter().enumerate().map(|(j, t)| (t.to_string(), j as u32)).collect();
        let n = vocab.len() as u32;
        FieldSpec {
            name: name.into(),
            kind: FieldKind::Categorical,
            cardinality: n + reserve_unknown as u32,
            vocab,
            unknown_index: reserve_unknown.then_some(n),
            policy: None,
            stats: None,
        }
    }

    pub fn numerical(name: impl Into<String>, policy: NumericPolicy, stats: Option<NumericStats>) -> Self {
        let cardinality = match &policy {
            NumericPolicy::Retain { .. } => 1,
            NumericPolicy::Discretize { boundaries } => boundaries.len() as u32 + 1,
        };
        FieldSpec {
            name: name.into(),
            kind: FieldKind::Numerical,
            cardinality,
            vocab: BTreeMap::new(),
            unknown_index: None,
            policy: Some(policy),
            stats,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(format!("field {index} ({}): {msg}", self.name)));
        match self.kind {
            FieldKind::Categorical => {
                let n_vocab = self.vocab.len() as u32;
                let expected = n_vocab + self.unknown_index.is_some() as u32;
                if self.cardinality != expected {
                    return bad(format!("cardinality {} but vocab implies {expected}", self.cardinality));
                }
                let locals: BTreeSet<u32> = self.vocab.values().copied().collect();
                if locals.len() != self.vocab.len() || locals.iter().any(|&j| j >= n_vocab) {
                    return bad("vocab indices are not dense".into());
                }
                if let Some(u) = self.unknown_index {
                    if u != n_vocab {
                        return bad(format!("unknown index {u} must equal vocab size {n_vocab}"));
                    }
                }
                if self.policy.is_some() {
                    return bad("categorical field carries a numeric policy".into());
                }
            }
            FieldKind::Numerical => match &self.policy {
                Some(NumericPolicy::Retain { standardize }) => {
                    if self.cardinality != 1 {
                        return bad("retained numerical field must have cardinality 1".into());
                    }
                    if *standardize && self.stats.is_none() {
                        return bad("standardization requires stats".into());
                    }
                }
                Some(NumericPolicy::Discretize { boundaries }) => {
                    if boundaries.windows(2).any(|w| !(w[0] < w[1])) || boundaries.iter().any(|b| !b.is_finite()) {
                        return bad("discretize boundaries must be finite and strictly increasing".into());
                    }
                    if self.cardinality as usize != boundaries.len() + 1 {
                        return bad("cardinality must be boundaries + 1".into());
                    }
                }
                None => return bad("numerical field without policy".into()),
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemaOptions {
    /// Reserve one extra local index per categorical field for unseen tokens.
    pub reserve_unknown: bool,
}

impl Default for SchemaOptions {
    fn default() -> Self {
        Self { reserve_unknown: true }
    }
}

/// Field layout of the global sparse feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct FeatureSchema {
    fields: Vec<FieldSpec>,
    offsets: Vec<u32>,
    total_features: u32,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    fields: Vec<FieldSpec>,
    total_features: u32,
}

impl TryFrom<SchemaRepr> for FeatureSchema {
    type Error = Error;

    fn try_from(repr: SchemaRepr) -> Result<Self> {
        let schema = FeatureSchema::from_fields(repr.fields)?;
        if schema.total_features != repr.total_features {
            return Err(Error::Format(format!(
                "schema declares {} features but fields sum to {}",
                repr.total_features, schema.total_features
            )));
        }
        Ok(schema)
    }
}

impl From<FeatureSchema> for SchemaRepr {
    fn from(s: FeatureSchema) -> Self {
        SchemaRepr { total_features: s.total_features, fields: s.fields }
    }
}

/// Decoded per-field content of an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Token(String),
    Unknown,
    Bucket(u32),
    Value(f64),
}

impl FeatureSchema {
    pub fn from_fields(fields: Vec<FieldSpec>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Format("schema needs at least one field".into()));
        }
        for (i, f) in fields.iter().enumerate() {
            f.validate(i)?;
        }
        let mut offsets = Vec::with_capacity(fields.len());
        let mut total: u64 = 0;
        for f in &fields {
            offsets.push(total as u32);
            total += f.cardinality as u64;
        }
        if total > u32::MAX as u64 {
            return Err(Error::Format(format!("{total} features exceed the 32-bit ID space")));
        }
        Ok(Self { fields, offsets, total_features: total as u32 })
    }

    /// Scans the records once, collecting vocabularies and numeric statistics.
    pub fn build<I>(records: I, decls: &[FieldDecl], opts: SchemaOptions) -> Result<Self>
    where
        I: IntoIterator<Item = Result<RawRecord>>,
    {
        let m = decls.len();
        if m == 0 {
            return Err(Error::Parameter("no fields declared".into()));
        }
        let mut vocabs: Vec<BTreeSet<String>> = vec![BTreeSet::new(); m];
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); m];
        for rec in records {
            let rec = rec?;
            if rec.tokens.len() != m {
                return Err(Error::Malformed {
                    line: rec.line,
                    message: format!("expected {m} fields, found {}", rec.tokens.len()),
                });
            }
            for (i, (tok, decl)) in rec.tokens.iter().zip(decls).enumerate() {
                match decl {
                    FieldDecl::Categorical => {
                        if !vocabs[i].contains(tok.as_str()) {
                            vocabs[i].insert(tok.clone());
                        }
                    }
                    _ => values[i].push(parse_number(tok, rec.line, i)?),
                }
            }
        }

        let mut fields = Vec::with_capacity(m);
        for (i, decl) in decls.iter().enumerate() {
            let name = format!("f{i}");
            let spec = match decl {
                FieldDecl::Categorical => {
                    let tokens: Vec<&str> = vocabs[i].iter().map(String::as_str).collect();
                    FieldSpec::categorical(name, &tokens, opts.reserve_unknown)
                }
                numeric => {
                    let stats = numeric_stats(&values[i]);
                    let policy = match numeric {
                        FieldDecl::Retain => NumericPolicy::Retain { standardize: false },
                        FieldDecl::Standardize => NumericPolicy::Retain { standardize: true },
                        FieldDecl::Quantiles(n) => {
                            NumericPolicy::Discretize { boundaries: quantile_boundaries(&values[i], *n) }
                        }
                        FieldDecl::Boundaries(b) => NumericPolicy::Discretize { boundaries: b.clone() },
                        FieldDecl::Categorical => unreachable!(),
                    };
                    FieldSpec::numerical(name, policy, stats)
                }
            };
            fields.push(spec);
        }
        Self::from_fields(fields)
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn total_features(&self) -> usize {
        self.total_features as usize
    }

    pub fn cardinalities(&self) -> Vec<u32> {
        self.fields.iter().map(|f| f.cardinality).collect()
    }

    /// Half-open global-ID range owned by field `field`.
    pub fn field_range(&self, field: usize) -> std::ops::Range<u32> {
        let start = self.offsets[field];
        start..start + self.fields[field].cardinality
    }

    /// Global identifier of local feature `local` in 0-based field `field`.
    ///
    /// Implements `GlobalID(i, j) = Σ_{k=1}^{i-1} n_k + j` with the 1-based
    /// field number `i = field + 1`.
    pub fn global_id(&self, field: usize, local: u32) -> Result<u32> {
        if field >= self.fields.len() {
            return Err(Error::Index { what: "field", index: field, bound: self.fields.len() });
        }
        let n_i = self.fields[field].cardinality;
        if local >= n_i {
            return Err(Error::Index { what: "local feature", index: local as usize, bound: n_i as usize });
        }
        let i = field + 1;
        let preceding: u32 = self.fields[..i - 1].iter().map(|f| f.cardinality).sum();
        Ok(preceding + local)
    }

    /// Inverse of [`global_id`](Self::global_id).
    pub fn locate(&self, id: u32) -> Result<(usize, u32)> {
        if id >= self.total_features {
            return Err(Error::Index {
                what: "global feature",
                index: id as usize,
                bound: self.total_features as usize,
            });
        }
        let field = self.offsets.partition_point(|&o| o <= id) - 1;
        Ok((field, id - self.offsets[field]))
    }

    /// Encodes one raw record (label + field tokens).
    pub fn encode_record(&self, rec: &RawRecord) -> Result<SparseInstance> {
        self.encode(rec.label, &rec.tokens, rec.line)
    }

    pub fn encode<S: AsRef<str>>(&self, label: u8, tokens: &[S], line: usize) -> Result<SparseInstance> {
        let m = self.fields.len();
        if tokens.len() != m {
            return Err(Error::Malformed { line, message: format!("expected {m} fields, found {}", tokens.len()) });
        }
        let mut ids = Vec::with_capacity(m);
        let mut values = Vec::with_capacity(m);
        for (i, (spec, tok)) in self.fields.iter().zip(tokens).enumerate() {
            let tok = tok.as_ref();
            let offset = self.offsets[i];
            match spec.kind {
                FieldKind::Categorical => {
                    let local = match spec.vocab.get(tok) {
                        Some(&j) => j,
                        None => spec
                            .unknown_index
                            .ok_or_else(|| Error::UnknownToken { field: i, token: tok.to_string() })?,
                    };
                    ids.push(offset + local);
                    values.push(1.0);
                }
                FieldKind::Numerical => {
                    let x = parse_number(tok, line, i)?;
                    match spec.policy.as_ref().expect("validated") {
                        NumericPolicy::Retain { standardize } => {
                            ids.push(offset);
                            let v = if *standardize {
                                let s = spec.stats.expect("validated");
                                (x - s.mean) / if s.std > 0.0 { s.std } else { 1.0 }
                            } else {
                                x
                            };
                            values.push(v as f32);
                        }
                        NumericPolicy::Discretize { boundaries } => {
                            ids.push(offset + bucket_of(boundaries, x));
                            values.push(1.0);
                        }
                    }
                }
            }
        }
        Ok(SparseInstance { ids, values, label })
    }

    /// Maps an instance back to per-field content.
    pub fn decode(&self, inst: &SparseInstance) -> Result<Vec<Decoded>> {
        if inst.ids.len() != self.fields.len() {
            return Err(Error::dim("decode", self.fields.len(), inst.ids.len()));
        }
        let mut out = Vec::with_capacity(inst.ids.len());
        for (i, (&id, &value)) in inst.ids.iter().zip(&inst.values).enumerate() {
            let (field, local) = self.locate(id)?;
            if field != i {
                return Err(Error::Format(format!("id {id} at position {i} belongs to field {field}")));
            }
            let spec = &self.fields[i];
            out.push(match spec.kind {
                FieldKind::Categorical => {
                    if Some(local) == spec.unknown_index {
                        Decoded::Unknown
                    } else {
                        let tok =
                            spec.vocab.iter().find(|(_, &j)| j == local).map(|(t, _)| t.clone()).expect("dense vocab");
                        Decoded::Token(tok)
                    }
                }
                FieldKind::Numerical => match spec.policy.as_ref().expect("validated") {
                    NumericPolicy::Retain { standardize: false } => Decoded::Value(value as f64),
                    NumericPolicy::Retain { standardize: true } => {
                        let s = spec.stats.expect("validated");
                        let std = if s.std > 0.0 { s.std } else { 1.0 };
                        Decoded::Value(value as f64 * std + s.mean)
                    }
                    NumericPolicy::Discretize { .. } => Decoded::Bucket(local),
                },
            });
        }
        Ok(out)
    }

    /// Checks that every ID lies in its field's range.
    pub fn check_instance(&self, inst: &SparseInstance) -> Result<()> {
        if inst.ids.len() != self.fields.len() || inst.values.len() != self.fields.len() {
            return Err(Error::dim("instance width", self.fields.len(), inst.ids.len()));
        }
        for (i, &id) in inst.ids.iter().enumerate() {
            if !self.field_range(i).contains(&id) {
                return Err(Error::Index {
                    what: "global feature",
                    index: id as usize,
                    bound: self.field_range(i).end as usize,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn parse_number(tok: &str, line: usize, field: usize) -> Result<f64> {
    let x: f64 = tok.trim().parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
        line,
        field,
        token: tok.to_string(),
        message: e.to_string(),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse { line, field, token: tok.to_string(), message: "non-finite value".into() });
    }
    Ok(x)
}

/// Index of the bucket holding `x`: the number of boundaries `<= x`.
pub fn bucket_of(boundaries: &[f64], x: f64) -> u32 {
    boundaries.partition_point(|&b| b <= x) as u32
}

fn numeric_stats(values: &[f64]) -> Option<NumericStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(NumericStats {
        count: values.len() as u64,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
    })
}

fn quantile_boundaries(values: &[f64], buckets: usize) -> Vec<f64> {
    if values.is_empty() || buckets < 2 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(buckets - 1);
    for q in 1..buckets {
        let b = sorted[q * sorted.len() / buckets];
        if out.last().is_none_or(|&last| b > last) && b > sorted[0] {
            out.push(b);
        }
    }
    out
}
