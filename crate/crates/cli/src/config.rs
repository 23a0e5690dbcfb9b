//! Run configuration: one JSON file per run, patched by command-line flags.

use std::path::{Path, PathBuf};

use ctr_core::metrics::SweepAxis;
use ctr_core::models::{ModelKind, ModelSpec};
use ctr_core::simulate::{ClickModel, SyntheticSpec};
use ctr_core::training::TrainConfig;
use ctr_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexSection {
    pub input: Option<PathBuf>,
    /// Destination of the indexed binary file.
    pub output: Option<PathBuf>,
    pub delimiter: char,
    /// Zero-based field positions (label excluded) holding numbers.
    pub numeric_fields: Vec<usize>,
    /// `retain`, `standardize`, `quantiles:N` or `boundaries:a,b,...`.
    pub numeric_policy: String,
    pub reserve_unknown: bool,
    /// Load `data.schema` instead of building it from `input`.
    pub reuse_schema: bool,
}

impl Default for IndexSection {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            delimiter: '\t',
            numeric_fields: Vec::new(),
            numeric_policy: "standardize".into(),
            reserve_unknown: true,
            reuse_schema: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Catalog JSON; generated from `types` and `per_type` when absent.
    pub catalog: Option<PathBuf>,
    pub types: usize,
    pub per_type: usize,
    /// Number of user groups.
    pub t: usize,
    /// Users per group.
    pub n: usize,
    pub history_len: usize,
    /// Random impressions per user in the training click log.
    pub impressions: usize,
    /// Cut-offs at which lists are compared.
    pub ls: Vec<usize>,
    pub model_a: ModelSpec,
    pub model_b: ModelSpec,
    /// Pre-trained models; override `model_a` / `model_b`.
    pub checkpoint_a: Option<PathBuf>,
    pub checkpoint_b: Option<PathBuf>,
    pub clicks: ClickModel,
    /// Simulate downloads on the lists for CTR and CVR columns.
    pub click_simulation: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            catalog: None,
            types: 5,
            per_type: 20,
            t: 5,
            n: 20,
            history_len: 5,
            impressions: 40,
            ls: vec![5, 10, 20],
            model_a: ModelSpec::new(ModelKind::Lr),
            model_b: ModelSpec::new(ModelKind::DeepFmD).with_k(8).with_hidden([64, 64]),
            checkpoint_a: None,
            checkpoint_b: None,
            clicks: ClickModel::default(),
            click_simulation: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub kinds: Vec<ModelKind>,
    pub k: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    /// Simulated read latency per batch in the reader comparison.
    pub throttle_ms: u64,
    pub queue: usize,
    pub workers: Vec<usize>,
    /// Synthetic fixture used when `data.train` is unset.
    pub fields: usize,
    pub cardinality: usize,
    pub instances: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            k: 10,
            hidden: vec![400, 400, 400],
            epochs: 1,
            throttle_ms: 3,
            queue: 4,
            workers: vec![1, 4],
            fields: 10,
            cardinality: 20,
            instances: 5000,
        }
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::new(ModelKind::DeepFmD)
}

fn default_train() -> TrainConfig {
    TrainConfig::new(256, 0.001, 5)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_train")]
    pub train: TrainConfig,
    /// FM epochs run before an FNN copies its embeddings.
    #[serde(default)]
    pub pretrain_epochs: usize,
    #[serde(default = "SweepAxis::dropout_default")]
    pub sweep: SweepAxis,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub synth: Option<SyntheticSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.simulate.model_a.validate()?;
        self.simulate.model_b.validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output.dir.join(name)
    }

    /// SHA-256 of the merged configuration's JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One `key.path = value` override.
#[derive(Debug, Clone)]
pub struct Patch {
    pub path: String,
    pub value: Value,
}

impl Patch {
    pub fn new(path: &str, value: impl Into<Value>) -> Self {
        Self { path: path.to_string(), value: value.into() }
    }

    /// Parses `key.path=value`; the value is read as JSON, or as a bare string.
    pub fn parse(s: &str) -> Result<Self> {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got {s:?}")))?;
        if k.trim().is_empty() {
            return Err(Error::Config(format!("empty key in {s:?}")));
        }
        Ok(Self { path: k.trim().to_string(), value: json_or_string(v) })
    }
}

pub fn json_or_string(v: &str) -> Value {
    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

fn apply(root: &mut Value, patch: &Patch) -> Result<()> {
    let mut node = root;
    let keys: Vec<&str> = patch.path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{}: {} is not an object", patch.path, keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), patch.value.clone());
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Fills the per-kind architecture defaults under the model spec at `path`.
fn fill_model_defaults(root: &mut Value, path: &[&str]) -> Result<()> {
    let mut node = &mut *root;
    for key in path {
        match node.get_mut(*key) {
            Some(n) => node = n,
            None => return Ok(()),
        }
    }
    let Some(obj) = node.as_object_mut() else {
        return Ok(());
    };
    let Some(kind) = obj.get("kind") else {
        return Err(Error::Config(format!("{}: missing model kind", path.join("."))));
    };
    let kind: ModelKind =
        kind.as_str().ok_or_else(|| Error::Config(format!("{}.kind must be a string", path.join("."))))?.parse()?;
    overlay(obj, serde_json::to_value(ModelSpec::new(kind))?);
    obj.insert("kind".into(), serde_json::to_value(kind)?);
    Ok(())
}

/// Puts the keys of `obj` on top of `defaults`, in place.
fn overlay(obj: &mut Map<String, Value>, defaults: Value) {
    let Value::Object(mut full) = defaults else {
        unreachable!("defaults serialize to an object");
    };
    for (k, v) in std::mem::take(obj) {
        full.insert(k, v);
    }
    *obj = full;
}

/// Reads `path` (if any), applies `patches` in order and validates the result.
pub fn load(path: Option<&Path>, patches: &[Patch]) -> Result<RunConfig> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(Error::Config("the configuration must be a JSON object".into()));
    }
    for p in patches {
        apply(&mut root, p)?;
    }
    for path in [&["model"][..], &["simulate", "model_a"], &["simulate", "model_b"]] {
        fill_model_defaults(&mut root, path)?;
    }
    if let Some(Value::Object(train)) = root.get_mut("train") {
        overlay(train, serde_json::to_value(default_train())?);
    }
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
