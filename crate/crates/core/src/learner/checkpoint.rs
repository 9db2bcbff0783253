//! Checkpoint layout: 8-byte magic, u32 LE header length, JSON header, then
//! every parameter tensor followed by every momentum buffer as LE `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::ModelConfig;
use super::{LearnerError, Model};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"EGWCKPT1";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    input_mean: [f32; 3],
    input_scale: [f32; 3],
    current_lr: f64,
    epoch: usize,
    tensors: Vec<TensorInfo>,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), LearnerError> {
    let header = Header {
        version: VERSION,
        config: model.config().clone(),
        input_mean: model.input_mean,
        input_scale: model.input_scale,
        current_lr: model.current_lr,
        epoch: model.epoch,
        tensors: model
            .net
            .params
            .iter()
            .map(|p| TensorInfo {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    let tensors = model.net.params.iter().map(|p| &p.data).chain(&model.momentum_buffers);
    for t in tensors {
        for v in t {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|source| LearnerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Model, LearnerError> {
    let bad = |reason: &str| LearnerError::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let bytes = fs::read(path).map_err(|source| LearnerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    if header.version != VERSION {
        return Err(bad(&format!("unsupported version {}", header.version)));
    }
    let mut model = Model::new(&header.config)?;
    if header.tensors.len() != model.net.params.len()
        || header
            .tensors
            .iter()
            .zip(&model.net.params)
            .any(|(t, p)| t.shape != p.shape || t.name != p.name)
    {
        return Err(bad("tensor table does not match the configured network"));
    }
    let mut floats = bytes[12 + hlen..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let expected: usize = model.net.params.iter().map(|p| 2 * p.data.len()).sum();
    if bytes.len() - 12 - hlen != 4 * expected {
        return Err(bad("tensor data has the wrong length"));
    }
    for p in &mut model.net.params {
        p.data.iter_mut().for_each(|v| *v = floats.next().unwrap());
    }
    for m in &mut model.momentum_buffers {
        m.iter_mut().for_each(|v| *v = floats.next().unwrap());
    }
    model.input_mean = header.input_mean;
    model.input_scale = header.input_scale;
    model.current_lr = header.current_lr;
    model.epoch = header.epoch;
    Ok(model)
}
