//! Versioned binary container for trained weights and the shared matrices.
//!
//! Layout: 8-byte magic, `u32` little-endian header length, a JSON header
//! listing dimensions, seeds and tensor shapes, then every tensor as
//! little-endian `f64` values in header order.

use super::models::{Mlp, SenNet, Trainable};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::phy::CompressionMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_MAGIC: &[u8; 8] = b"UAVFBNN\0";
pub const SCHEMA_VERSION: u32 = 1;

/// Dimensions a container must match to be usable by a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub la: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub sennet: Option<SenNet>,
    pub aidnet: Option<Mlp>,
    pub recnet: Mlp,
    pub phi: CompressionMatrix,
    /// Seed of the spreading code family (Walsh codes are deterministic).
    pub q_seed: u64,
    pub master_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    n: usize,
    la: usize,
    m: usize,
    phi_seed: u64,
    q_seed: u64,
    master_seed: u64,
    spreading: String,
    tensors: Vec<TensorInfo>,
}

fn expected_tensors(dims: Dims, sennet: bool, aidnet: bool) -> Result<Vec<TensorInfo>> {
    let Dims { n, la, .. } = dims;
    let mut out = Vec::new();
    let mut push = |name: &str, shape: Vec<usize>| out.push(TensorInfo { name: name.into(), shape });
    if sennet {
        let p = SenNet::zeros(la, n)?.dense.fan_in();
        push("sennet.kernel", vec![3, 3]);
        push("sennet.bias", vec![1]);
        push("sennet.dense.w", vec![1, p]);
        push("sennet.dense.b", vec![1]);
    }
    if aidnet {
        push("aidnet.hidden.w", vec![4 * n, 2 * n]);
        push("aidnet.hidden.b", vec![4 * n]);
        push("aidnet.output.w", vec![2 * n, 4 * n]);
        push("aidnet.output.b", vec![2 * n]);
    }
    push("recnet.hidden.w", vec![4 * la * n, 2 * n]);
    push("recnet.hidden.b", vec![4 * la * n]);
    push("recnet.output.w", vec![2 * la * n, 4 * la * n]);
    push("recnet.output.b", vec![2 * la * n]);
    push("phi", vec![la * n, n, 2]);
    Ok(out)
}

impl ModelParams {
    pub fn sennet(&self) -> Result<&SenNet> {
        self.sennet.as_ref().ok_or(Error::MissingWeights("sennet"))
    }

    pub fn aidnet(&self) -> Result<&Mlp> {
        self.aidnet.as_ref().ok_or(Error::MissingWeights("aidnet"))
    }

    fn header(&self) -> Result<Header> {
        Ok(Header {
            schema_version: SCHEMA_VERSION,
            n: self.dims.n,
            la: self.dims.la,
            m: self.dims.m,
            phi_seed: self.phi.seed,
            q_seed: self.q_seed,
            master_seed: self.master_seed,
            spreading: "walsh".into(),
            tensors: expected_tensors(self.dims, self.sennet.is_some(), self.aidnet.is_some())?,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header()?)?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * (self.recnet.hidden.w.len() * 2));
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let mut put = |xs: &[f64]| {
            for x in xs {
                out.extend_from_slice(&x.to_le_bytes());
            }
        };
        if let Some(s) = &self.sennet {
            s.params().into_iter().for_each(&mut put);
        }
        if let Some(a) = &self.aidnet {
            a.params().into_iter().for_each(&mut put);
        }
        self.recnet.params().into_iter().for_each(&mut put);
        for c in self.phi.phi.iter() {
            put(&[c.re, c.im]);
        }
        Ok(out)
    }

    /// Parses a container; `expect` rejects files built for other dimensions.
    pub fn from_bytes(bytes: &[u8], expect: Option<Dims>) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
            return Err(Error::Format("not a model container (bad magic)".into()));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body_start = 12usize.checked_add(hlen).filter(|&e| e <= bytes.len());
        let Some(body_start) = body_start else {
            return Err(Error::Format("truncated header".into()));
        };
        let raw: serde_json::Value = serde_json::from_slice(&bytes[12..body_start])?;
        let version = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != SCHEMA_VERSION {
            return Err(Error::Version { expected: SCHEMA_VERSION, found: version });
        }
        let header: Header = serde_json::from_value(raw)?;
        let dims = Dims { n: header.n, la: header.la, m: header.m };
        if let Some(want) = expect {
            if want != dims {
                return Err(Error::Shape {
                    what: "model container (N, La, M)".into(),
                    expected: vec![want.n, want.la, want.m],
                    found: vec![dims.n, dims.la, dims.m],
                });
            }
        }
        let has = |p: &str| header.tensors.iter().any(|t| t.name.starts_with(p));
        let (has_sen, has_aid) = (has("sennet."), has("aidnet."));
        let want = expected_tensors(dims, has_sen, has_aid)?;
        if want.len() != header.tensors.len() {
            return Err(Error::Format("unexpected tensor list".into()));
        }
        for (w, t) in want.iter().zip(&header.tensors) {
            if w.name != t.name {
                return Err(Error::Format(format!("expected tensor {}, found {}", w.name, t.name)));
            }
            if w.shape != t.shape {
                return Err(Error::Shape { what: t.name.clone(), expected: w.shape.clone(), found: t.shape.clone() });
            }
        }
        let total: usize = want.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        let body = &bytes[body_start..];
        if body.len() < total * 8 {
            return Err(Error::Format(format!("truncated body: {} of {} bytes", body.len(), total * 8)));
        }
        if body.len() > total * 8 {
            return Err(Error::Format("trailing bytes after last tensor".into()));
        }
        let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut fill = |dst: &mut [f64]| {
            for d in dst.iter_mut() {
                *d = vals.next().expect("length checked");
            }
        };
        let sennet = if has_sen {
            let mut s = SenNet::zeros(dims.la, dims.n)?;
            s.params_mut().into_iter().for_each(&mut fill);
            Some(s)
        } else {
            None
        };
        let aidnet = if has_aid {
            let mut a = Mlp::aidnet_zeros(dims.n);
            a.params_mut().into_iter().for_each(&mut fill);
            Some(a)
        } else {
            None
        };
        let mut recnet = Mlp::recnet_zeros(dims.n, dims.la);
        recnet.params_mut().into_iter().for_each(&mut fill);
        let mut flat = vec![0.0; 2 * dims.la * dims.n * dims.n];
        fill(&mut flat);
        let phi = Array2::from_shape_fn((dims.la * dims.n, dims.n), |(i, j)| {
            let k = 2 * (i * dims.n + j);
            C64::new(flat[k], flat[k + 1])
        });
        Ok(Self {
            dims,
            sennet,
            aidnet,
            recnet,
            phi: CompressionMatrix::from_matrix(phi, header.phi_seed),
            q_seed: header.q_seed,
            master_seed: header.master_seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path, expect: Option<Dims>) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Missing(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?, expect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn sample(n: usize, la: usize, full: bool) -> ModelParams {
        let mut rng = SimRng::seed_from_u64(1);
        ModelParams {
            dims: Dims { n, la, m: 64 },
            sennet: full.then(|| SenNet::init(la, n, &mut rng).unwrap()),
            aidnet: full.then(|| Mlp::aidnet(n, &mut rng)),
            recnet: Mlp::recnet(n, la, &mut rng),
            phi: CompressionMatrix::generate(la * n, n, 3).unwrap(),
            q_seed: 0,
            master_seed: 42,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for full in [true, false] {
            let p = sample(8, 3, full);
            let bytes = p.to_bytes().unwrap();
            let back = ModelParams::from_bytes(&bytes, Some(p.dims)).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = sample(4, 3, true).to_bytes().unwrap();
        bytes[0] ^= 0xff;
        assert!(matches!(ModelParams::from_bytes(&bytes, None), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file() {
        let bytes = sample(4, 3, true).to_bytes().unwrap();
        for cut in [5, 20, bytes.len() - 3] {
            assert!(matches!(ModelParams::from_bytes(&bytes[..cut], None), Err(Error::Format(_))), "cut {cut}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = sample(8, 3, true);
        let bytes = p.to_bytes().unwrap();
        let err = ModelParams::from_bytes(&bytes, Some(Dims { n: 4, la: 3, m: 64 })).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn version_mismatch() {
        let p = sample(4, 3, false);
        let bytes = p.to_bytes().unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = String::from_utf8(bytes[12..12 + hlen].to_vec()).unwrap();
        let patched = header.replace("\"schema_version\":1", "\"schema_version\":9");
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(patched.len() as u32).to_le_bytes());
        out.extend_from_slice(patched.as_bytes());
        out.extend_from_slice(&bytes[12 + hlen..]);
        assert!(matches!(ModelParams::from_bytes(&out, None), Err(Error::Version { found: 9, .. })));
    }

    #[test]
    fn missing_optional_networks() {
        let p = sample(4, 3, false);
        assert!(matches!(p.sennet(), Err(Error::MissingWeights("sennet"))));
        assert!(matches!(p.aidnet(), Err(Error::MissingWeights("aidnet"))));
    }
}
