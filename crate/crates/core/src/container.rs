//! Binary tensor container shared by conv-net weights, BSIF filter banks and
//! trained detector models.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   "CNWT1"
//! u32     tensor count
//! per tensor:
//!   u16   name length, then that many bytes of UTF-8 name
//!   u8    rank
//!   u32   dims[rank]
//!   f32   data[product(dims)], row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"CNWT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = dims.iter().map(|&d| d as usize).product();
        if expected != data.len() {
            return Err(Error::Container(format!(
                "tensor `{name}`: dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        if name.len() > u16::MAX as usize {
            return Err(Error::Container("tensor name too long".into()));
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::Container("tensor rank too large".into()));
        }
        Ok(Self { name, dims, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered list of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightFile {
    pub tensors: Vec<Tensor>,
}

impl WeightFile {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Container("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32()?);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
                .ok_or_else(|| Error::Container(format!("tensor `{name}` is too large")))?;
            let raw = r
                .take(n.saturating_mul(4))
                .map_err(|_| Error::Container(format!("tensor `{name}` is truncated")))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Container(format!(
                "{} trailing bytes after last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Container("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
