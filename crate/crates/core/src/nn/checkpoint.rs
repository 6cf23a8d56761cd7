//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "SPRBCKPT"
//! version   u32
//! meta_len  u64, followed by meta_len bytes of UTF-8 JSON metadata
//! count     u32, followed by `count` parameter records:
//!   name_len u32, name bytes
//!   trainable u8
//!   ndim u32, ndim x u64 dims
//!   product(dims) x f64 values
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"SPRBCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub trainable: bool,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: serde_json::Value,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(metadata: serde_json::Value) -> Self {
        Checkpoint {
            metadata,
            params: Vec::new(),
        }
    }

    /// Appends every parameter of `store`, each name prefixed with `prefix`.
    pub fn push_store(&mut self, prefix: &str, store: &ParamStore) {
        for (_, name, t, trainable) in store.iter() {
            let mut tensor = t.clone();
            tensor.clear_grad();
            self.params.push(NamedTensor {
                name: format!("{prefix}{name}"),
                trainable,
                tensor,
            });
        }
    }

    /// Rebuilds a store from every parameter whose name starts with `prefix`.
    pub fn store(&self, prefix: &str) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for p in &self.params {
            if let Some(name) = p.name.strip_prefix(prefix) {
                let id = store.add(name, p.tensor.clone())?;
                store.set_trainable(id, p.trainable);
            }
        }
        Ok(store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.metadata).expect("json value serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.push(u8::from(p.trainable));
            let shape = p.tensor.shape();
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in p.tensor.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let meta_len = r.u64()? as usize;
        let metadata = serde_json::from_slice(r.take(meta_len)?)?;
        let count = r.u32()?;
        let mut params = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
            let trainable = match r.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(Error::Checkpoint(format!("bad trainable flag {b}"))),
            };
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.push(NamedTensor {
                name,
                trainable,
                tensor: Tensor::new(shape, values)?,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { metadata, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
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
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
