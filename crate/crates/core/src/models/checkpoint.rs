//! Checkpoint directories: `manifest.json` plus one little-endian `f32`
//! file per parameter, row-major, named `<parameter path>.bin`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HeadKind, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub architecture: HeadKind,
    pub config: ModelConfig,
    pub seed: u64,
    pub vocab_hash: String,
    pub parameters: Vec<ParamEntry>,
}

/// Exclusive writer lock on a checkpoint directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(DirLock { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn save<T: Real>(dir: &Path, model: &Model<T>, seed: u64, vocab_hash: &str) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let _lock = DirLock::acquire(dir)?;
    let mut parameters = Vec::new();
    for (name, tensor) in model.params() {
        let file = format!("{name}.bin");
        let bytes: Vec<u8> = tensor
            .data()
            .iter()
            .flat_map(|v| (v.as_f64() as f32).to_le_bytes())
            .collect();
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        parameters.push(ParamEntry {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            file,
        });
    }
    let manifest = CheckpointManifest {
        format_version: 1,
        architecture: model.head_kind(),
        config: model.config().clone(),
        seed,
        vocab_hash: vocab_hash.to_string(),
        parameters,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<(Model<f32>, CheckpointManifest)> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    let mut params = BTreeMap::new();
    for entry in &manifest.parameters {
        let p = dir.join(&entry.file);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let n: usize = entry.shape.iter().product();
        if bytes.len() != 4 * n {
            return Err(Error::Format {
                path: p,
                line: 0,
                reason: format!(
                    "expected {} bytes for shape {:?}, found {}",
                    4 * n,
                    entry.shape,
                    bytes.len()
                ),
            });
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.insert(entry.name.clone(), Tensor::new(entry.shape.clone(), data)?);
    }
    let model = Model::from_parts(manifest.config.clone(), params)?;
    Ok((model, manifest))
}
