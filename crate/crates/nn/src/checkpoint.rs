//! Parameter checkpoints: a JSON manifest next to a flat binary of
//! (name, shape, values) records.
//!
//! `save_checkpoint("x", params)` writes `x.json` and `x.bin`. The binary
//! holds one record per tensor in manifest order: a length-prefixed UTF-8
//! name, the shape as two little-endian u32 values, then the row-major values
//! as little-endian f64. The manifest duplicates names, shapes, and byte
//! offsets so a reader can locate records without scanning, and carries a
//! mandatory format version.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::ParamSet;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub tensors: Vec<TensorRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub rows: u32,
    pub cols: u32,
    /// Byte offset of this record in the .bin file.
    pub offset: u64,
}

fn manifest_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

fn binary_path(stem: &Path) -> PathBuf {
    stem.with_extension("bin")
}

/// Write `stem.json` and `stem.bin` for every tensor in the set.
pub fn save_checkpoint(stem: &Path, params: &ParamSet) -> Result<()> {
    let mut records = Vec::with_capacity(params.entries().len());
    let mut blob: Vec<u8> = Vec::new();
    for (name, tensor) in params.entries() {
        let (rows, cols) = tensor.shape();
        records.push(TensorRecord {
            name: name.clone(),
            rows: rows as u32,
            cols: cols as u32,
            offset: blob.len() as u64,
        });
        let name_bytes = name.as_bytes();
        blob.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        blob.extend_from_slice(name_bytes);
        blob.extend_from_slice(&(rows as u32).to_le_bytes());
        blob.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in tensor.value() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        tensors: records,
    };
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(manifest_path(stem), json)?;
    let mut file = std::fs::File::create(binary_path(stem))?;
    file.write_all(&blob)?;
    Ok(())
}

fn read_u32(blob: &[u8], pos: &mut usize) -> Result<u32> {
    let end = *pos + 4;
    if end > blob.len() {
        return Err(NnError::Checkpoint("binary record truncated".into()));
    }
    let v = u32::from_le_bytes(blob[*pos..end].try_into().unwrap());
    *pos = end;
    Ok(v)
}

/// Load values from `stem.json` + `stem.bin` into an already constructed
/// parameter set. Names and shapes must match the set exactly.
pub fn load_checkpoint(stem: &Path, params: &ParamSet) -> Result<()> {
    let manifest_file = manifest_path(stem);
    let text = std::fs::read_to_string(&manifest_file)?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            manifest.version
        )));
    }
    if manifest.tensors.len() != params.entries().len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} tensors, model expects {}",
            manifest.tensors.len(),
            params.entries().len()
        )));
    }
    let mut blob = Vec::new();
    std::fs::File::open(binary_path(stem))?.read_to_end(&mut blob)?;
    for (record, (name, tensor)) in manifest.tensors.iter().zip(params.entries()) {
        if &record.name != name {
            return Err(NnError::Checkpoint(format!(
                "tensor name mismatch: checkpoint has {:?}, model expects {:?}",
                record.name, name
            )));
        }
        let (rows, cols) = tensor.shape();
        if (record.rows as usize, record.cols as usize) != (rows, cols) {
            return Err(NnError::Checkpoint(format!(
                "shape mismatch for {name}: checkpoint {}x{}, model {rows}x{cols}",
                record.rows, record.cols
            )));
        }
        let mut pos = record.offset as usize;
        let name_len = read_u32(&blob, &mut pos)? as usize;
        if pos + name_len > blob.len() {
            return Err(NnError::Checkpoint("binary record truncated".into()));
        }
        let stored_name = std::str::from_utf8(&blob[pos..pos + name_len])
            .map_err(|_| NnError::Checkpoint(format!("invalid UTF-8 name at offset {pos}")))?;
        if stored_name != name {
            return Err(NnError::Checkpoint(format!(
                "binary record name {stored_name:?} disagrees with manifest entry {name:?}"
            )));
        }
        pos += name_len;
        let stored_rows = read_u32(&blob, &mut pos)? as usize;
        let stored_cols = read_u32(&blob, &mut pos)? as usize;
        if (stored_rows, stored_cols) != (rows, cols) {
            return Err(NnError::Checkpoint(format!(
                "binary shape disagrees with manifest for {name}"
            )));
        }
        let count = rows * cols;
        let end = pos + count * 8;
        if end > blob.len() {
            return Err(NnError::Checkpoint("binary record truncated".into()));
        }
        let mut values = Vec::with_capacity(count);
        for chunk in blob[pos..end].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        tensor.set_value(&values)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_params(seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let a = Tensor::parameter(3, 4, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .unwrap();
        let b = Tensor::parameter(1, 5, (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .unwrap();
        params.register("enc/w", &a);
        params.register("enc/b", &b);
        params
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        let saved = sample_params(1);
        save_checkpoint(&stem, &saved).unwrap();
        let loaded = sample_params(2);
        assert_ne!(saved.flat_values(), loaded.flat_values());
        load_checkpoint(&stem, &loaded).unwrap();
        assert_eq!(saved.flat_values(), loaded.flat_values());
    }

    #[test]
    fn version_field_is_mandatory_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        save_checkpoint(&stem, &sample_params(1)).unwrap();
        let manifest_file = stem.with_extension("json");
        let text = std::fs::read_to_string(&manifest_file).unwrap();
        assert!(text.contains("\"version\""));
        let mut manifest: CheckpointManifest = serde_json::from_str(&text).unwrap();
        manifest.version = 99;
        std::fs::write(&manifest_file, serde_json::to_string(&manifest).unwrap()).unwrap();
        let err = load_checkpoint(&stem, &sample_params(1)).unwrap_err();
        assert!(err.to_string().contains("version"));
        // A manifest with no version field at all fails to parse.
        std::fs::write(&manifest_file, "{\"tensors\": []}").unwrap();
        assert!(load_checkpoint(&stem, &sample_params(1)).is_err());
    }

    #[test]
    fn shape_and_name_mismatches_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        save_checkpoint(&stem, &sample_params(1)).unwrap();
        let mut other = ParamSet::new();
        let a = Tensor::parameter(3, 4, vec![0.0; 12]).unwrap();
        let b = Tensor::parameter(1, 5, vec![0.0; 5]).unwrap();
        other.register("enc/w", &a);
        other.register("enc/bias", &b);
        let err = load_checkpoint(&stem, &other).unwrap_err();
        assert!(err.to_string().contains("name mismatch"));

        let mut shaped = ParamSet::new();
        let a = Tensor::parameter(4, 3, vec![0.0; 12]).unwrap();
        let b = Tensor::parameter(1, 5, vec![0.0; 5]).unwrap();
        shaped.register("enc/w", &a);
        shaped.register("enc/b", &b);
        let err = load_checkpoint(&stem, &shaped).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
    }
}
