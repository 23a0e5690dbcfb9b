use std::path::Path;

use ctr_core::featurespace::FeatureSchema;
use ctr_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::{sha256_hex, RunConfig};

/// Provenance block at the top of every report.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub command: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub schema_hash: String,
}

impl Header {
    pub fn new(command: &'static str, cfg: &RunConfig, schema_hash: String) -> Result<Self> {
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash()?,
            seed: cfg.seed(),
            schema_hash,
        })
    }
}

pub fn schema_hash(schema: &FeatureSchema) -> Result<String> {
    Ok(sha256_hex(schema.to_json()?.as_bytes()))
}

/// Writes `{"header": …, …body}` as pretty JSON.
pub fn write_report(path: &Path, header: &Header, body: Value) -> Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("header".into(), serde_json::to_value(header)?);
    match body {
        Value::Object(map) => doc.extend(map),
        other => {
            doc.insert("body".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&Value::Object(doc))? + "\n";
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

pub fn load_schema(path: &Path) -> Result<FeatureSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    FeatureSchema::from_json(&text)
}

pub fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| Error::Config(format!("{key} is required")))
}
