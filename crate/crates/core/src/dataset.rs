//! In-memory datasets and their binary container.
//!
//! Layout: 8-byte magic, `u32` little-endian header length, JSON header,
//! then inputs (`count x input_len` f64), targets (`count x target_len` f64),
//! LoS flags (`count` bytes) and per-sample stream indices (`count` u64),
//! all little-endian. A sample's stream index regenerates its channels,
//! data and noise exactly.

use crate::config::{Role, Split};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 8] = b"UAVFBDS\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub role: Role,
    pub split: Split,
    /// One sample per row.
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// Ground-truth LoS state of each sample.
    pub los: Vec<bool>,
    pub seeds: Vec<u64>,
    pub snr_db: f64,
    pub beta: f64,
    pub master_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    role: Role,
    split: Split,
    count: usize,
    input_len: usize,
    target_len: usize,
    snr_db: Option<f64>,
    beta: f64,
    master_seed: u64,
    dtype: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn los_fraction(&self) -> f64 {
        self.los.iter().filter(|&&l| l).count() as f64 / self.len().max(1) as f64
    }

    pub fn file_name(role: Role, split: Split) -> String {
        format!("{}.{}.ds", role.as_str(), split.as_str())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            version: DATASET_VERSION,
            role: self.role,
            split: self.split,
            count: self.len(),
            input_len: self.x.ncols(),
            target_len: self.y.ncols(),
            snr_db: self.snr_db.is_finite().then_some(self.snr_db),
            beta: self.beta,
            master_seed: self.master_seed,
            dtype: "f64-le".into(),
        };
        let h = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + h.len() + 8 * (self.x.len() + self.y.len()) + 9 * self.len());
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&(h.len() as u32).to_le_bytes());
        out.extend_from_slice(&h);
        for v in self.x.iter().chain(self.y.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(self.los.iter().map(|&l| l as u8));
        for s in &self.seeds {
            out.extend_from_slice(&s.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != DATASET_MAGIC {
            return Err(Error::Format("not a dataset container (bad magic)".into()));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if 12 + hlen > bytes.len() {
            return Err(Error::Format("truncated header".into()));
        }
        let raw: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen])?;
        let version = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != DATASET_VERSION {
            return Err(Error::Version { expected: DATASET_VERSION, found: version });
        }
        let h: Header = serde_json::from_value(raw)?;
        let body = &bytes[12 + hlen..];
        let nx = h.count * h.input_len;
        let ny = h.count * h.target_len;
        let need = 8 * (nx + ny) + 9 * h.count;
        if body.len() != need {
            return Err(Error::Format(format!("dataset body has {} bytes, expected {need}", body.len())));
        }
        let floats = |range: std::ops::Range<usize>| -> Vec<f64> {
            body[range].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
        };
        let x = Array2::from_shape_vec((h.count, h.input_len), floats(0..8 * nx))
            .map_err(|e| Error::Format(e.to_string()))?;
        let y = Array2::from_shape_vec((h.count, h.target_len), floats(8 * nx..8 * (nx + ny)))
            .map_err(|e| Error::Format(e.to_string()))?;
        let off = 8 * (nx + ny);
        let los = body[off..off + h.count].iter().map(|&b| b != 0).collect();
        let seeds = body[off + h.count..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            role: h.role,
            split: h.split,
            x,
            y,
            los,
            seeds,
            snr_db: h.snr_db.unwrap_or(f64::INFINITY),
            beta: h.beta,
            master_seed: h.master_seed,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(Self::file_name(self.role, self.split)), self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(dir: &Path, role: Role, split: Split) -> Result<Self> {
        let path = dir.join(Self::file_name(role, split));
        if !path.exists() {
            return Err(Error::Missing(path));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }
}
