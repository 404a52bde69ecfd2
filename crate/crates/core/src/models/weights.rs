//! Weight file: `STAMWTS\0` magic, a little-endian `u32` format version, a
//! little-endian `u64` header length, a UTF-8 JSON header, then every
//! parameter as little-endian `f64` in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STAMWTS\0";
pub const WEIGHT_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    arch: String,
    config: ModelConfig,
    layers: Vec<LayerEntry>,
    value_count: usize,
}

pub fn save_weights(model: &Model, path: &Path) -> Result<()> {
    let store = model.store();
    let header = Header {
        format_version: WEIGHT_FILE_VERSION,
        arch: model.arch().to_string(),
        config: model.config().clone(),
        layers: store
            .names()
            .iter()
            .zip(store.tensors())
            .map(|(name, t)| LayerEntry {
                name: name.clone(),
                shape: t.shape().dims().to_vec(),
            })
            .collect(),
        value_count: store.total_count(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(20 + json.len() + 8 * header.value_count);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&WEIGHT_FILE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for t in store.tensors() {
        for v in t.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a self-describing weight file.
pub fn load_weights(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Loads a weight file and checks it was written for `expected`
/// (architecture and every dimension; seed and dropout are not compared).
pub fn load_weights_as(path: &Path, expected: &ModelConfig) -> Result<Model> {
    let model = load_weights(path)?;
    let got = model.config();
    let same = got.arch == expected.arch
        && got.n_vars == expected.n_vars
        && got.input_len == expected.input_len
        && got.output_len == expected.output_len
        && got.enc_dim == expected.enc_dim
        && got.dec_dim == expected.dec_dim
        && got.context_dim == expected.context_dim
        && got.per_variable_embedding == expected.per_variable_embedding;
    if !same {
        return Err(Error::ConfigMismatch(format!(
            "file holds {} (N={}, Tx={}, Ty={}, m={}, p={}, q={}), expected {} (N={}, Tx={}, Ty={}, m={}, p={}, q={})",
            got.arch, got.n_vars, got.input_len, got.output_len, got.enc_dim, got.dec_dim, got.context_dim,
            expected.arch, expected.n_vars, expected.input_len, expected.output_len, expected.enc_dim,
            expected.dec_dim, expected.context_dim,
        )));
    }
    Ok(model)
}

fn decode(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::CorruptFile("missing weight file magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != WEIGHT_FILE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: WEIGHT_FILE_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < header_len {
        return Err(Error::CorruptFile("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])
        .map_err(|e| Error::CorruptFile(format!("unreadable header: {e}")))?;
    if header.config.arch.to_string() != header.arch {
        return Err(Error::CorruptFile(format!(
            "header arch {} disagrees with config arch {}",
            header.arch, header.config.arch
        )));
    }
    let values = &body[header_len..];
    if values.len() != 8 * header.value_count {
        return Err(Error::CorruptFile(format!(
            "expected {} parameter bytes, found {}",
            8 * header.value_count,
            values.len()
        )));
    }

    let mut model = Model::new(header.config.clone())?;
    let store = model.store_mut();
    let manifest_ok = store.len() == header.layers.len()
        && store
            .names()
            .iter()
            .zip(store.tensors())
            .zip(&header.layers)
            .all(|((name, t), entry)| *name == entry.name && t.shape().dims() == entry.shape.as_slice());
    if !manifest_ok || store.total_count() != header.value_count {
        return Err(Error::CorruptFile(
            "layer manifest does not match the architecture in the header".into(),
        ));
    }
    let mut chunks = values.chunks_exact(8);
    for t in store.tensors_mut() {
        for v in t.values_mut() {
            *v = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8 bytes"));
        }
    }
    Ok(model)
}
