//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `CNAVCKPT`, u32 format version, u32 header
//! length, JSON header, u32 tensor count, then per tensor a u32 name length,
//! UTF-8 name, u32 rank, u64 dims and row-major f64 payload. A trailing u64
//! FNV-1a hash covers every preceding byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{NetConfig, PolicyParams, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CNAVCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Parameters plus optional auxiliary state. Auxiliary tensor names must
/// contain a `/` so they never collide with parameter names.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub extra_tensors: Vec<Tensor>,
    pub extra: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    network: NetConfig,
    #[serde(default)]
    extra: serde_json::Value,
}

impl Checkpoint {
    pub fn new(params: PolicyParams) -> Self {
        Checkpoint {
            params,
            extra_tensors: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        format_version: FORMAT_VERSION,
        network: ckpt.params.config.clone(),
        extra: ckpt.extra.clone(),
    })
    .map_err(|e| Error::Contract(format!("checkpoint header: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    let tensors: Vec<&Tensor> = ckpt
        .params
        .tensors()
        .iter()
        .chain(&ckpt.extra_tensors)
        .collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        if self.bytes.len() - self.pos < n {
            return Err(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<(Header, Vec<Tensor>), String> {
    if bytes.len() < MAGIC.len() + 16 {
        return Err(format!("file too short ({} bytes)", bytes.len()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(8, "magic")? != MAGIC {
        return Err("bad magic: not a checkpoint file".into());
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        ));
    }
    let expected = u64::from_le_bytes(tail.try_into().unwrap());
    let actual = fnv1a(body);
    if expected != actual {
        return Err(format!(
            "checksum mismatch: stored {expected:016x}, computed {actual:016x}"
        ));
    }
    let header_len = r.u32("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| format!("header: {e}"))?;
    let count = r.u32("tensor count")?;
    let mut tensors = Vec::with_capacity(count as usize);
    for i in 0..count {
        let len = r.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| format!("tensor {i}: name is not UTF-8"))?
            .to_string();
        let rank = r.u32("tensor rank")?;
        let shape = (0..rank)
            .map(|_| r.u64("tensor dims").map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let payload = r.take(n * 8, &format!("payload of `{name}`"))?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor { name, shape, data });
    }
    if r.pos != body.len() {
        return Err(format!(
            "{} trailing bytes after the last tensor",
            body.len() - r.pos
        ));
    }
    Ok((header, tensors))
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let fail = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let (header, tensors) = decode_inner(bytes).map_err(fail)?;
    header
        .network
        .validate("network")
        .map_err(|e| fail(format!("header: {e}")))?;
    let (extra_tensors, params): (Vec<Tensor>, Vec<Tensor>) =
        tensors.into_iter().partition(|t| t.name.contains('/'));
    let params =
        PolicyParams::from_tensors(&header.network, params).map_err(|e| fail(e.to_string()))?;
    Ok(Checkpoint {
        params,
        extra_tensors,
        extra: header.extra,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode(ckpt)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode(&bytes, path)
}
