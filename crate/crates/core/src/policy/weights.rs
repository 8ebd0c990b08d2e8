//! Binary weight files and their JSON metadata sidecar.
//!
//! Layout (little-endian): magic `ARTN`, `u32` version, `u32` tensor count,
//! then per tensor a `u16` name length, the UTF-8 name, a `u8` rank, `rank`
//! `u32` dimensions and the `f32` data in row-major order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::net::{NetConfig, PolicyNet};

pub const MAGIC: &[u8; 4] = b"ARTN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("not a weight file (bad magic)")]
    BadMagic,
    #[error("unsupported weight file version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("tensor `{tensor}`: {detail}")]
    ShapeMismatch { tensor: String, detail: String },
}

/// Sidecar stored next to the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelMeta {
    pub model_id: String,
    pub name: String,
    pub trained_episodes: u64,
    /// RFC 3339 timestamp.
    pub created_at: String,
}

pub fn save_weights(net: &PolicyNet<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + net.param_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let tensors = net.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for d in &t.shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &net.params()[t.offset..t.offset + t.len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a weight file for a network of architecture `cfg`.
pub fn load_weights(bytes: &[u8], cfg: &NetConfig) -> Result<PolicyNet<f32>, WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(WeightsError::BadMagic);
    }
    let header = |what: &str| WeightsError::ShapeMismatch {
        tensor: "<header>".into(),
        detail: format!("truncated {what}"),
    };
    let version = r.u32().ok_or_else(|| header("version"))?;
    if version != FORMAT_VERSION {
        return Err(WeightsError::VersionMismatch { found: version });
    }
    let count = r.u32().ok_or_else(|| header("tensor count"))? as usize;
    let mut net = PolicyNet::<f32>::zeros(*cfg).map_err(|e| WeightsError::ShapeMismatch {
        tensor: "<config>".into(),
        detail: e.to_string(),
    })?;
    let expected = net.tensors();
    if count != expected.len() {
        return Err(WeightsError::ShapeMismatch {
            tensor: "<header>".into(),
            detail: format!("file has {count} tensors, expected {}", expected.len()),
        });
    }
    for info in expected {
        let mismatch = |detail: String| WeightsError::ShapeMismatch {
            tensor: info.name.to_string(),
            detail,
        };
        let truncated = || mismatch("truncated".into());
        let name_len = r.u16().ok_or_else(truncated)? as usize;
        let name = r.take(name_len).ok_or_else(truncated)?;
        let name = String::from_utf8_lossy(name);
        if name != info.name {
            return Err(mismatch(format!("found tensor `{name}` in its place")));
        }
        let rank = r.u8().ok_or_else(truncated)? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(truncated)?;
        if dims != info.shape {
            return Err(mismatch(format!("shape {dims:?}, expected {:?}", info.shape)));
        }
        let data = r.take(info.len * 4).ok_or_else(truncated)?;
        let dst = &mut net.params_mut()[info.offset..info.offset + info.len];
        for (d, chunk) in dst.iter_mut().zip(data.chunks_exact(4)) {
            *d = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
    }
    if r.pos != bytes.len() {
        return Err(WeightsError::ShapeMismatch {
            tensor: "<trailer>".into(),
            detail: format!("{} unexpected trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(net)
}
