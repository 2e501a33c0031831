//! Checkpoint format: a JSON manifest naming every parameter with its
//! shape and offset, plus a raw little-endian f32 blob.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::nn::tensor::ParamSet;
use crate::num::Real;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset into the blob, in f32 elements.
    pub offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub model: String,
    pub config: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

/// Write `{prefix}.json` and `{prefix}.bin`.
pub fn save<T: Real>(
    prefix: &Path,
    model: &str,
    config: serde_json::Value,
    params: &ParamSet<T>,
) -> Result<(PathBuf, PathBuf)> {
    let mut entries = Vec::with_capacity(params.len());
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0u64;
    for (name, value) in params.iter() {
        entries.push(ParamEntry {
            name: name.to_string(),
            rows: value.nrows(),
            cols: value.ncols(),
            offset,
        });
        for v in value.iter() {
            blob.extend_from_slice(&(v.to_f64c() as f32).to_le_bytes());
        }
        offset += value.len() as u64;
    }
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        model: model.to_string(),
        config,
        params: entries,
    };
    let json_path = prefix.with_extension("json");
    let bin_path = prefix.with_extension("bin");
    fs::write(&json_path, serde_json::to_vec_pretty(&manifest)?)?;
    fs::write(&bin_path, blob)?;
    Ok((json_path, bin_path))
}

/// Load a checkpoint; parameter order follows the manifest.
pub fn load<T: Real>(json_path: &Path) -> Result<(CheckpointManifest, ParamSet<T>)> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(json_path)?)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::invalid_argument(format!(
            "checkpoint version {} unsupported",
            manifest.version
        )));
    }
    let blob = fs::read(json_path.with_extension("bin"))?;
    let mut params = ParamSet::new();
    for e in &manifest.params {
        let start = e.offset as usize * 4;
        let n = e.rows * e.cols;
        let end = start + n * 4;
        if end > blob.len() {
            return Err(Error::invalid_argument("checkpoint blob too short"));
        }
        let vals: Vec<T> = blob[start..end]
            .chunks_exact(4)
            .map(|b| T::from_f64c(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
            .collect();
        let arr = Array2::from_shape_vec((e.rows, e.cols), vals)
            .map_err(|e| Error::invalid_argument(format!("checkpoint shape: {e}")))?;
        params.add(e.name.clone(), arr);
    }
    Ok((manifest, params))
}
