//! Binary checkpoint format.
//!
//! Layout: the magic bytes `SMI1`, a little-endian `u64` byte length, that
//! many bytes of UTF-8 JSON metadata (architecture plus a tensor manifest of
//! names, shapes and byte offsets into the payload), then the payload of raw
//! little-endian `f64` values in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchConfig, Params, SpeakerModel, Tensor, PARAM_NAMES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SMI1";

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    arch: ArchConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the payload.
    offset: u64,
}

pub fn to_bytes(model: &SpeakerModel) -> Vec<u8> {
    let mut offset = 0u64;
    let tensors = model
        .params
        .named()
        .map(|(name, t)| {
            let e = TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += 8 * t.len() as u64;
            e
        })
        .collect();
    let meta = Metadata {
        arch: model.arch().clone(),
        tensors,
    };
    let json = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(12 + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<SpeakerModel> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(format_err(0, "missing SMI1 magic"));
    }
    let meta_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let meta_end = 12usize
        .checked_add(meta_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| format_err(4, "metadata length exceeds file size"))?;
    let meta: Metadata = serde_json::from_slice(&bytes[12..meta_end])
        .map_err(|e| format_err(12, format!("bad metadata: {e}")))?;
    let payload = &bytes[meta_end..];
    if meta.tensors.len() != PARAM_NAMES.len() {
        return Err(format_err(12, "tensor manifest has the wrong number of entries"));
    }
    let mut loaded = Vec::with_capacity(meta.tensors.len());
    for (entry, expected) in meta.tensors.iter().zip(PARAM_NAMES) {
        if entry.name != expected {
            return Err(format_err(
                12,
                format!("expected tensor {expected}, found {}", entry.name),
            ));
        }
        let n: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + 8 * n;
        if end > payload.len() {
            return Err(format_err(
                (meta_end + start) as u64,
                format!("tensor {} runs past end of file", entry.name),
            ));
        }
        let data = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        loaded.push(Tensor::new(entry.shape.clone(), data)?);
    }
    let mut it = loaded.into_iter();
    let mut next = || it.next().expect("12 tensors");
    let params = Params {
        sinc_low: next(),
        sinc_band: next(),
        ln_gain: next(),
        ln_bias: next(),
        conv_w: next(),
        conv_b: next(),
        dense1_w: next(),
        dense1_b: next(),
        dense2_w: next(),
        dense2_b: next(),
        head_w: next(),
        head_b: next(),
    };
    SpeakerModel::from_params(meta.arch, params)
}

pub fn save(model: &SpeakerModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<SpeakerModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
