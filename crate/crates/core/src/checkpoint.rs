//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"UIJEPA1" | u32 version | u32 record count | record*
//! record = u8 kind | u32 name length | name bytes | payload
//!   kind 0 (f32 tensor): u32 ndim | u64 dim* | f32 data*
//!   kind 1 (u64):        u64
//!   kind 2 (text):       u64 length | utf-8 bytes
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Array, ParamStore};

pub const MAGIC: &[u8; 7] = b"UIJEPA1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Tensor(Array<f32>),
    U64(u64),
    Text(String),
}

/// Ordered named records. Names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    records: Vec<(String, Record)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[(String, Record)] {
        &self.records
    }

    pub fn push(&mut self, name: impl Into<String>, record: Record) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Format(format!("duplicate checkpoint record {name}")));
        }
        self.records.push((name, record));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn tensor(&self, name: &str) -> Result<&Array<f32>> {
        match self.get(name) {
            Some(Record::Tensor(a)) => Ok(a),
            _ => Err(Error::Format(format!("missing tensor record {name}"))),
        }
    }

    pub fn u64(&self, name: &str) -> Result<u64> {
        match self.get(name) {
            Some(Record::U64(v)) => Ok(*v),
            _ => Err(Error::Format(format!("missing integer record {name}"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.get(name) {
            Some(Record::Text(s)) => Ok(s),
            _ => Err(Error::Format(format!("missing text record {name}"))),
        }
    }

    /// Record every parameter of `store` as `prefix + name`.
    pub fn push_store(&mut self, prefix: &str, store: &ParamStore<f32>) -> Result<()> {
        for p in store.iter() {
            self.push(format!("{prefix}{}", p.name()), Record::Tensor(p.value().clone()))?;
        }
        Ok(())
    }

    /// Overwrite every parameter of `store` from `prefix + name` records.
    pub fn load_store(&self, prefix: &str, store: &mut ParamStore<f32>) -> Result<()> {
        for p in store.iter_mut() {
            let value = self.tensor(&format!("{prefix}{}", p.name()))?.clone();
            p.set_value(value)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, rec) in &self.records {
            let kind: u8 = match rec {
                Record::Tensor(_) => 0,
                Record::U64(_) => 1,
                Record::Text(_) => 2,
            };
            out.push(kind);
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match rec {
                Record::Tensor(a) => {
                    out.extend_from_slice(&(a.shape().len() as u32).to_le_bytes());
                    for &d in a.shape() {
                        out.extend_from_slice(&(d as u64).to_le_bytes());
                    }
                    for &v in a.data() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Record::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
                Record::Text(s) => {
                    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
                    out.extend_from_slice(s.as_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()?;
        let mut ck = Checkpoint::new();
        for _ in 0..count {
            let kind = r.take(1)?[0];
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("record name is not utf-8".into()))?;
            let rec = match kind {
                0 => {
                    let ndim = r.u32()? as usize;
                    let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
                    let n: usize = shape.iter().product();
                    let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
                    let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
                    Record::Tensor(Array::new(shape, data)?)
                }
                1 => Record::U64(r.u64()?),
                2 => {
                    let n = r.u64()? as usize;
                    let s = String::from_utf8(r.take(n)?.to_vec())
                        .map_err(|_| Error::Format(format!("record {name} is not utf-8")))?;
                    Record::Text(s)
                }
                k => return Err(Error::Format(format!("unknown record kind {k} for {name}"))),
            };
            ck.push(name, rec)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated checkpoint at byte {}", self.pos)))?;
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
