//! Binary checkpoints.
//!
//! Layout: the 8-byte magic `CTRCKPT1`, a little-endian `u32` header length,
//! a JSON header (spec, geometry, tensor names and lengths), then every
//! tensor in declaration order as little-endian `f64`. A JSON sidecar next to
//! the checkpoint mirrors the header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::Model;
use super::spec::ModelSpec;
use super::store::ParameterStore;
use crate::error::{Error, Result};
use crate::numerics::Scalar;

const MAGIC: &[u8; 8] = b"CTRCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub spec: ModelSpec,
    pub num_fields: usize,
    pub num_features: usize,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

/// Path of the JSON sidecar for a checkpoint at `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn header_of<T: Scalar>(model: &Model<T>) -> CheckpointHeader {
    CheckpointHeader {
        spec: model.spec.clone(),
        num_fields: model.num_fields,
        num_features: model.num_features,
        tensors: model.store.tensors().iter().map(|(id, t)| TensorEntry { name: id.name(), len: t.len() }).collect(),
    }
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let header = header_of(model);
    let json = serde_json::to_vec(&header)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
    write(MAGIC)?;
    write(&(json.len() as u32).to_le_bytes())?;
    write(&json)?;
    for (_, t) in model.store.tensors() {
        for x in t {
            write(&x.as_f64().to_le_bytes())?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&header)?).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut read = |buf: &mut [u8]| {
        input.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("{}: truncated checkpoint", path.display())),
            _ => Error::io(path, e),
        })
    };
    let mut magic = [0u8; 8];
    read(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: not a checkpoint", path.display())));
    }
    let mut len = [0u8; 4];
    read(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    read(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    let mut store = ParameterStore::<T>::zeros(&header.spec, header.num_fields, header.num_features)?;
    {
        let tensors = store.tensors_mut();
        if tensors.len() != header.tensors.len() {
            return Err(Error::Format(format!(
                "{}: header lists {} tensors, spec implies {}",
                path.display(),
                header.tensors.len(),
                tensors.len()
            )));
        }
        for ((id, data), entry) in tensors.into_iter().zip(&header.tensors) {
            if id.name() != entry.name || data.len() != entry.len {
                return Err(Error::Format(format!(
                    "{}: tensor {} ({}) does not match expected {} ({})",
                    path.display(),
                    entry.name,
                    entry.len,
                    id.name(),
                    data.len()
                )));
            }
            let mut buf = [0u8; 8];
            for x in data.iter_mut() {
                read(&mut buf)?;
                *x = T::of(f64::from_le_bytes(buf));
            }
        }
    }
    let mut probe = [0u8; 1];
    if input.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::Format(format!("{}: trailing bytes after tensors", path.display())));
    }
    Model::from_store(header.spec, header.num_fields, header.num_features, store)
}
