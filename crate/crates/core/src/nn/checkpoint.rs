//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `SFCKPT\0\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a UTF-8 JSON header, then
//! every tensor listed in the header as little-endian `f64` values in header
//! order. Values are stored bit for bit, so a write-then-reload continues
//! training exactly where it stopped.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelShape, NetworkConfig};
use super::optim::{RmsProp, RmsPropConfig};
use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SFCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: NetworkConfig,
    shape: ModelShape,
    class_ids: Vec<u32>,
    seed: u64,
    epoch: usize,
    step: usize,
    optimizer: RmsPropConfig,
    parameters: Vec<TensorEntry>,
    buffers: Vec<TensorEntry>,
    /// Empty until the first optimizer step.
    accumulators: Vec<TensorEntry>,
}

/// A model together with the training state needed to resume it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: RmsProp,
    /// Corpus class id for each output unit.
    pub class_ids: Vec<u32>,
    pub seed: u64,
    pub epoch: usize,
    pub step: usize,
}

fn entries<'a>(tensors: impl IntoIterator<Item = (String, &'a Tensor)>) -> Vec<TensorEntry> {
    tensors
        .into_iter()
        .map(|(name, t)| TensorEntry {
            name,
            shape: t.shape().to_vec(),
        })
        .collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.model.parameters();
        let buffers = self.model.buffers();
        let accs = self.optimizer.accumulators();
        let header = Header {
            config: self.model.config().clone(),
            shape: self.model.shape(),
            class_ids: self.class_ids.clone(),
            seed: self.seed,
            epoch: self.epoch,
            step: self.step,
            optimizer: self.optimizer.config,
            parameters: entries(params.iter().map(|(n, t)| (n.clone(), *t))),
            buffers: entries(buffers.iter().map(|(n, t)| (n.clone(), *t))),
            accumulators: entries(
                accs.iter()
                    .zip(&params)
                    .map(|(t, (n, _))| (format!("{n}.rms"), t)),
            ),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let all = params
            .iter()
            .map(|(_, t)| *t)
            .chain(buffers.iter().map(|(_, t)| *t))
            .chain(accs.iter());
        for t in all {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body_start = 20usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..body_start])
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;

        let mut cursor = body_start;
        let mut read = |entries: &[TensorEntry]| -> Result<Vec<Tensor>> {
            entries
                .iter()
                .map(|e| {
                    let n: usize = e.shape.iter().product();
                    let end = cursor
                        .checked_add(n * 8)
                        .filter(|&end| end <= bytes.len())
                        .ok_or_else(|| Error::Checkpoint(format!("truncated tensor {}", e.name)))?;
                    let data = bytes[cursor..end]
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect();
                    cursor = end;
                    Tensor::new(e.shape.clone(), data)
                })
                .collect()
        };
        let params = read(&header.parameters)?;
        let buffers = read(&header.buffers)?;
        let accs = read(&header.accumulators)?;
        if cursor != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }

        let mut model = Model::new(&header.config, header.shape, header.seed)?;
        let expected: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
        let found: Vec<&str> = header.parameters.iter().map(|e| e.name.as_str()).collect();
        if expected != found {
            return Err(bad("parameter names do not match the configured architecture"));
        }
        model.load_tensors(params, buffers)?;
        if !accs.is_empty() && accs.len() != expected.len() {
            return Err(bad("optimizer state does not cover every parameter"));
        }
        if header.class_ids.len() != header.shape.n_classes {
            return Err(bad("class id list does not match the output layer"));
        }
        Ok(Self {
            model,
            optimizer: RmsProp::with_state(header.optimizer, accs),
            class_ids: header.class_ids,
            seed: header.seed,
            epoch: header.epoch,
            step: header.step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
