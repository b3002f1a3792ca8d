//! Binary model checkpoints with a JSON sidecar.
//!
//! Layout, all little-endian:
//! `b"PLCNN\0\0\0"`, `u32` version, eight `u32` architecture fields
//! (input, kernel, conv1, conv2, dense1, dense2, classes, dropout in
//! thousandths), `u32` tensor count, then per tensor a `u32` length followed
//! by that many `f32` values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Arch, CnnModel, Network, TENSOR_NAMES};
use super::ClassifierError;

pub const MAGIC: &[u8; 8] = b"PLCNN\0\0\0";
pub const VERSION: u32 = 1;
pub const LABELS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub arch: Arch,
    pub labels: Vec<String>,
    pub tensors: Vec<TensorInfo>,
    pub parameter_count: usize,
    /// SHA-256 of the binary checkpoint.
    pub sha256: String,
    /// Free-form provenance such as the training configuration.
    #[serde(default)]
    pub notes: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(model: &CnnModel) -> Vec<u8> {
    let a = &model.arch;
    let mut out = Vec::with_capacity(64 + 4 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let dropout = (a.dropout * 1000.0).round() as u32;
    for v in [a.input, a.kernel, a.conv1, a.conv2, a.dense1, a.dense2, a.classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&dropout.to_le_bytes());
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for t in &model.params {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<CnnModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let mut f = [0usize; 7];
    for v in f.iter_mut() {
        *v = r.u32()? as usize;
    }
    let dropout = r.u32()? as f64 / 1000.0;
    let arch = Arch {
        input: f[0],
        kernel: f[1],
        conv1: f[2],
        conv2: f[3],
        dense1: f[4],
        dense2: f[5],
        classes: f[6],
        dropout,
    };
    arch.validate().map_err(|e| e.to_string())?;
    let count = r.u32()? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(format!("{count} tensors, expected {}", TENSOR_NAMES.len()));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let raw = r.take(len.checked_mul(4).ok_or("tensor length overflows")?)?;
        params.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Network::from_params(arch, params).map_err(|e| e.to_string())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or("truncated checkpoint")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn save_checkpoint(
    model: &CnnModel,
    path: &Path,
    notes: serde_json::Value,
) -> Result<CheckpointMeta, ClassifierError> {
    let bytes = encode(model);
    let meta = CheckpointMeta {
        format_version: VERSION,
        arch: model.arch,
        labels: LABELS.iter().take(model.arch.classes).map(|s| s.to_string()).collect(),
        tensors: TENSOR_NAMES
            .iter()
            .zip(&model.params)
            .map(|(n, t)| TensorInfo {
                name: n.to_string(),
                len: t.len(),
            })
            .collect(),
        parameter_count: model.parameter_count(),
        sha256: hex(&Sha256::digest(&bytes)),
        notes,
    };
    fs::write(path, &bytes).map_err(|source| io(path, source))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&side, json + "\n").map_err(|source| io(&side, source))?;
    Ok(meta)
}

/// Loads a checkpoint. The sidecar is optional, but when present its hash must match.
pub fn load_checkpoint(path: &Path) -> Result<CnnModel, ClassifierError> {
    let bytes = fs::read(path).map_err(|source| io(path, source))?;
    let bad = |detail: String| ClassifierError::Checkpoint {
        path: path.to_path_buf(),
        detail,
    };
    let model = decode(&bytes).map_err(bad)?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = fs::read_to_string(&side).map_err(|source| io(&side, source))?;
        let meta: CheckpointMeta = serde_json::from_str(&text).map_err(|e| bad(format!("sidecar: {e}")))?;
        if meta.sha256 != hex(&Sha256::digest(&bytes)) {
            return Err(bad("sidecar hash does not match the weights".into()));
        }
    }
    Ok(model)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn io(path: &Path, source: std::io::Error) -> ClassifierError {
    ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    }
}
