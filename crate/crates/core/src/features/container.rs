//! Binary spectrogram container and dataset directories.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SPEC" | u32 version | u32 T | u32 F | u32 C | C label bytes | T·F f32 (time-major)
//! ```
//!
//! Label bytes are 0 (negative), 1 (positive) or 2 (unknown). A dataset is a
//! directory of `<id>.spec` files plus `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spectrogram::{LabeledExample, Spectrogram};
use crate::error::{Error, Result};

pub const SPEC_MAGIC: &[u8; 4] = b"SPEC";
pub const SPEC_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

const LABEL_NEG: u8 = 0;
const LABEL_POS: u8 = 1;
const LABEL_UNKNOWN: u8 = 2;

pub fn encode_example(ex: &LabeledExample) -> Vec<u8> {
    let s = &ex.spectrogram;
    let c = ex.classes();
    let mut out = Vec::with_capacity(20 + c + 4 * s.values().len());
    out.extend_from_slice(SPEC_MAGIC);
    out.extend_from_slice(&SPEC_VERSION.to_le_bytes());
    out.extend_from_slice(&(s.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(s.bins() as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    for (y, k) in ex.labels.iter().zip(&ex.known) {
        out.push(match (k, *y >= 0.5) {
            (false, _) => LABEL_UNKNOWN,
            (true, true) => LABEL_POS,
            (true, false) => LABEL_NEG,
        });
    }
    for v in s.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(bytes.len(), format!("truncated before {what}")))
}

pub fn decode_example(bytes: &[u8], id: &str) -> Result<LabeledExample> {
    if bytes.len() < 4 || &bytes[..4] != SPEC_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"SPEC\""));
    }
    let version = read_u32(bytes, 4, "version")?;
    if version != SPEC_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let frames = read_u32(bytes, 8, "frame count")? as usize;
    let bins = read_u32(bytes, 12, "bin count")? as usize;
    let classes = read_u32(bytes, 16, "class count")? as usize;
    if frames == 0 || bins == 0 {
        return Err(Error::format(8, format!("empty shape {frames}x{bins}")));
    }
    let label_end = 20 + classes;
    let label_bytes = bytes
        .get(20..label_end)
        .ok_or_else(|| Error::format(bytes.len(), "truncated label block"))?;
    let mut labels = Vec::with_capacity(classes);
    let mut known = Vec::with_capacity(classes);
    for (i, &b) in label_bytes.iter().enumerate() {
        match b {
            LABEL_NEG => {
                labels.push(0.0);
                known.push(true);
            }
            LABEL_POS => {
                labels.push(1.0);
                known.push(true);
            }
            LABEL_UNKNOWN => {
                labels.push(0.0);
                known.push(false);
            }
            other => return Err(Error::format(20 + i, format!("invalid label byte {other}"))),
        }
    }
    let payload = &bytes[label_end..];
    let expected = 4 * frames * bins;
    if payload.len() != expected {
        return Err(Error::format(
            label_end,
            format!(
                "payload is {} bytes, {frames}x{bins} needs {expected}",
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect::<Vec<_>>();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(label_end + 4 * i, "non-finite value"));
    }
    let spectrogram = Spectrogram::new(frames, bins, values)?;
    LabeledExample::new(id, spectrogram, labels, known)
}

pub fn save_example(path: impl AsRef<Path>, ex: &LabeledExample) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_example(ex)).map_err(|e| Error::io(path, e))
}

/// Loads a container file; the example id is the file stem.
pub fn load_example(path: impl AsRef<Path>) -> Result<LabeledExample> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_example(&bytes, &id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!(
                "unknown split {other:?}, expected train, val or test"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub frames: usize,
    pub bins: usize,
    pub examples: Vec<ManifestEntry>,
    /// Free-form provenance, e.g. the generator config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<serde_json::Value>,
}

impl Manifest {
    pub fn ids(&self, split: Split) -> Vec<&str> {
        self.examples
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.id.as_str())
            .collect()
    }
}

/// Examples in manifest order together with their manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub examples: Vec<LabeledExample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<LabeledExample> {
        self.examples
            .iter()
            .zip(&self.manifest.examples)
            .filter(|(_, e)| e.split == split)
            .map(|(x, _)| x.clone())
            .collect()
    }

    pub fn by_id(&self) -> BTreeMap<&str, &LabeledExample> {
        self.examples.iter().map(|e| (e.id.as_str(), e)).collect()
    }
}

pub fn save_dataset(dir: impl AsRef<Path>, manifest: &Manifest, examples: &[LabeledExample]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if manifest.examples.len() != examples.len() {
        return Err(Error::config("manifest and example list differ in length"));
    }
    for (entry, ex) in manifest.examples.iter().zip(examples) {
        if entry.id != ex.id {
            return Err(Error::config(format!(
                "manifest id {:?} does not match example {:?}",
                entry.id, ex.id
            )));
        }
        save_example(dir.join(format!("{}.spec", ex.id)), ex)?;
    }
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest = load_manifest(dir)?;
    let mut examples = Vec::with_capacity(manifest.examples.len());
    for entry in &manifest.examples {
        let ex = load_example(dir.join(format!("{}.spec", entry.id)))?;
        if ex.classes() != manifest.class_names.len() {
            return Err(Error::format(
                16,
                format!(
                    "{} has {} classes, manifest lists {}",
                    entry.id,
                    ex.classes(),
                    manifest.class_names.len()
                ),
            ));
        }
        examples.push(ex);
    }
    Ok(Dataset { manifest, examples })
}
