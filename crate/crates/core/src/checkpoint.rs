//! Checkpoint files.
//!
//! ```text
//! "ATNM" | u32 version | u32 header length | UTF-8 JSON header | f32 LE parameter data
//! ```
//!
//! The header lists parameter names and shapes in payload order, the variant
//! tag, the model configuration, class names, free-form training metadata
//! and a SHA-256 of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::nn::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ATNM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub variant: String,
    pub model: ModelConfig,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub params: Vec<ParamEntry>,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// Parameter values in header order.
    pub values: Vec<Vec<f32>>,
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn from_store(
        model: &ModelConfig,
        store: &ParamStore,
        class_names: Vec<String>,
        metadata: serde_json::Value,
    ) -> Self {
        let mut params = Vec::with_capacity(store.len());
        let mut values = Vec::with_capacity(store.len());
        for (_, p) in store.iter() {
            params.push(ParamEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            });
            values.push(p.value.data().iter().map(|&x| x as f32).collect());
        }
        let mut ck = Self {
            header: CheckpointHeader {
                variant: model.variant().tag().to_string(),
                model: model.clone(),
                class_names,
                metadata,
                params,
                payload_sha256: String::new(),
            },
            values,
        };
        ck.header.payload_sha256 = sha_hex(&ck.payload());
        ck
    }

    fn payload(&self) -> Vec<u8> {
        self.values
            .iter()
            .flatten()
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&self.payload());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "bad magic, expected \"ATNM\""));
        }
        let u32_at = |off: usize| -> Result<u32> {
            bytes
                .get(off..off + 4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .ok_or_else(|| Error::format(bytes.len(), "truncated checkpoint preamble"))
        };
        let version = u32_at(4)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32_at(8)? as usize;
        let header_bytes = bytes
            .get(12..12 + hlen)
            .ok_or_else(|| Error::format(bytes.len(), "truncated checkpoint header"))?;
        let header: CheckpointHeader = serde_json::from_slice(header_bytes)
            .map_err(|e| Error::format(12, format!("invalid header: {e}")))?;
        if header.variant != header.model.variant().tag() {
            return Err(Error::format(
                12,
                format!(
                    "variant tag {:?} disagrees with model config {:?}",
                    header.variant,
                    header.model.variant().tag()
                ),
            ));
        }
        let payload = &bytes[12 + hlen..];
        let expected: usize = header
            .params
            .iter()
            .map(|p| 4 * p.shape.iter().product::<usize>())
            .sum();
        if payload.len() != expected {
            return Err(Error::format(
                12 + hlen,
                format!("payload is {} bytes, header describes {expected}", payload.len()),
            ));
        }
        if sha_hex(payload) != header.payload_sha256 {
            return Err(Error::format(12 + hlen, "payload checksum mismatch"));
        }
        let mut values = Vec::with_capacity(header.params.len());
        let mut off = 0;
        for p in &header.params {
            let n: usize = p.shape.iter().product();
            values.push(
                payload[off..off + 4 * n]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect(),
            );
            off += 4 * n;
        }
        Ok(Self { header, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Rebuilds the model and fills its parameters from the checkpoint.
    pub fn restore(&self) -> Result<(Model, ParamStore)> {
        let (model, mut store) = Model::build(&self.header.model, 0)?;
        if store.len() != self.header.params.len() {
            return Err(Error::format(
                12,
                format!(
                    "checkpoint has {} parameters, model {} expects {}",
                    self.header.params.len(),
                    self.header.variant,
                    store.len()
                ),
            ));
        }
        for (entry, vals) in self.header.params.iter().zip(&self.values) {
            let id = store
                .id(&entry.name)
                .ok_or_else(|| Error::format(12, format!("unknown parameter {:?}", entry.name)))?;
            if store.value(id).shape() != entry.shape.as_slice() {
                return Err(Error::format(
                    12,
                    format!(
                        "parameter {:?} has shape {:?}, model expects {:?}",
                        entry.name,
                        entry.shape,
                        store.value(id).shape()
                    ),
                ));
            }
            let t = Tensor::new(&entry.shape, vals.iter().map(|&v| v as f64).collect())?;
            *store.value_mut(id) = t;
        }
        Ok((model, store))
    }
}
