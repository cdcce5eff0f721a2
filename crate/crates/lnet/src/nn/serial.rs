//! Model file format: `"LNSK"` magic, u16 format version, u32 header length,
//! UTF-8 JSON header (config, ordered layer names and shapes, seed), then the
//! raw little-endian f32 parameter data concatenated in header order.
//!
//! f32 models round-trip bit-exactly; other scalar types are converted
//! through f32 on disk.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{build_model, Model, ModelConfig, ParameterStore};
use crate::scalar::Real;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"LNSK";
const VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    layers: Vec<LayerEntry>,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    name: String,
    shape: Vec<usize>,
}

/// Serializes the model to bytes in the `LNSK` format.
pub fn model_to_bytes<F: Real>(model: &Model<F>) -> Result<Vec<u8>> {
    let layers = model
        .params()
        .iter()
        .map(|(name, t)| LayerEntry { name: name.to_string(), shape: t.shape().to_vec() })
        .collect();
    let header = Header { config: model.config().clone(), layers, seed: model.seed() };
    let header_bytes = serde_json::to_vec(&header)?;
    let total_params = model.params().total_elements();
    let mut out = Vec::with_capacity(4 + 2 + 4 + header_bytes.len() + 4 * total_params);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, t) in model.params().iter() {
        for v in t.data() {
            let f = v.to_f64().expect("scalar convertible") as f32;
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_model<F: Real>(model: &Model<F>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

/// Parses a model from `LNSK` bytes, verifying framing, header/plan
/// consistency and exact payload length.
pub fn model_from_bytes<F: Real>(bytes: &[u8]) -> Result<Model<F>> {
    if bytes.len() < 10 {
        return Err(Error::Format(format!("file too short ({} bytes) for LNSK framing", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"LNSK\"", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}, expected {VERSION}")));
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let header_end = 10usize.checked_add(header_len).ok_or_else(|| Error::Format("header length overflow".into()))?;
    if bytes.len() < header_end {
        return Err(Error::Format(format!(
            "truncated header: declared {header_len} bytes, only {} available",
            bytes.len() - 10
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[10..header_end])
        .map_err(|e| Error::Format(format!("header is not valid JSON: {e}")))?;
    header.config.validate()?;

    // The header's layer list must agree with the plan the config derives.
    let reference = build_model::<F>(&header.config, header.seed)?;
    let expected: Vec<(String, Vec<usize>)> =
        reference.params().iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
    if expected.len() != header.layers.len() {
        return Err(Error::Format(format!(
            "header lists {} layers, config implies {}",
            header.layers.len(),
            expected.len()
        )));
    }
    for (entry, (name, shape)) in header.layers.iter().zip(&expected) {
        if &entry.name != name {
            return Err(Error::Format(format!("layer name mismatch: header {:?}, config implies {name:?}", entry.name)));
        }
        if &entry.shape != shape {
            return Err(Error::Format(format!("layer {name:?} shape mismatch: header {:?}, config implies {shape:?}", entry.shape)));
        }
    }

    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let payload = &bytes[header_end..];
    if payload.len() != 4 * total {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {} (4 x {total} parameters)",
            payload.len(),
            4 * total
        )));
    }

    let mut params = ParameterStore::new();
    let mut offset = 0usize;
    for (name, shape) in &expected {
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let at = offset + 4 * i;
            let v = f32::from_le_bytes([payload[at], payload[at + 1], payload[at + 2], payload[at + 3]]);
            data.push(F::from_f64_c(v as f64));
        }
        offset += 4 * count;
        params.insert(name, Tensor::new(shape.clone(), data)?)?;
    }
    let plan = header.config.plan()?;
    Ok(Model::from_parts(header.config, plan, params, header.seed))
}

pub fn load_model<F: Real>(path: impl AsRef<Path>) -> Result<Model<F>> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes)
}
