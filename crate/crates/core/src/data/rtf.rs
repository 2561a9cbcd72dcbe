//! RTF: a flat sequence of named, typed tensor records.
//!
//! Each record is laid out as (all integers little-endian):
//!
//! | field    | size            | value                          |
//! |----------|-----------------|--------------------------------|
//! | magic    | 4               | `RATF`                         |
//! | version  | 1               | `0x01`                         |
//! | dtype    | 1               | `0x01` = f32, `0x02` = f64     |
//! | rank     | 1               | `u8`                           |
//! | extents  | 8 × rank        | `u64` each                     |
//! | payload  | numel × width   | row-major IEEE-754 values      |
//! | name len | 2               | `u16` byte length              |
//! | name     | name len        | UTF-8                          |
//!
//! A file is zero or more records back to back. f32 payloads are promoted
//! to f64 on read.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RATF";
pub const VERSION: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0x01,
            DType::F64 => 0x02,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0x01 => Some(DType::F32),
            0x02 => Some(DType::F64),
            _ => None,
        }
    }
}

/// A tensor with its on-disk name and payload type.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dtype: DType,
    pub tensor: Tensor,
}

impl NamedTensor {
    pub fn f64(name: impl Into<String>, tensor: Tensor) -> Self {
        NamedTensor {
            name: name.into(),
            dtype: DType::F64,
            tensor,
        }
    }

    pub fn f32(name: impl Into<String>, tensor: Tensor) -> Self {
        NamedTensor {
            name: name.into(),
            dtype: DType::F32,
            tensor,
        }
    }
}

pub fn encode(records: &[NamedTensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for rec in records {
        let shape = rec.tensor.shape();
        let rank = u8::try_from(shape.len())
            .map_err(|_| Error::invalid(format!("tensor '{}' has rank > 255", rec.name)))?;
        let name_len = u16::try_from(rec.name.len())
            .map_err(|_| Error::invalid("tensor name longer than 65535 bytes".to_string()))?;
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(rec.dtype.code());
        out.push(rank);
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match rec.dtype {
            DType::F32 => {
                for &v in rec.tensor.data() {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            DType::F64 => {
                for &v in rec.tensor.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(rec.name.as_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!(
                    "truncated {what}: need {n} bytes, {} left",
                    self.buf.len() - self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn err(&self, at: usize, msg: String) -> Error {
        Error::Format {
            offset: at as u64,
            msg,
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let start = r.pos;
        if r.take(4, "magic")? != MAGIC {
            return Err(r.err(start, "bad magic, expected \"RATF\"".into()));
        }
        let at = r.pos;
        let version = r.take(1, "version")?[0];
        if version != VERSION {
            return Err(r.err(at, format!("unsupported version {version:#04x}")));
        }
        let at = r.pos;
        let code = r.take(1, "dtype")?[0];
        let dtype = DType::from_code(code)
            .ok_or_else(|| r.err(at, format!("unknown dtype {code:#04x}")))?;
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let at = r.pos;
            let d = u64::from_le_bytes(r.take(8, "extent")?.try_into().unwrap());
            if d == 0 {
                return Err(r.err(at, "zero extent".into()));
            }
            shape.push(usize::try_from(d).map_err(|_| r.err(at, format!("extent {d} too large")))?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| r.err(start, "extent product overflows".into()))?;
        let nbytes = numel
            .checked_mul(dtype.width())
            .ok_or_else(|| r.err(start, "payload size overflows".into()))?;
        let payload = r.take(nbytes, "payload")?;
        let data: Vec<f64> = match dtype {
            DType::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            DType::F64 => payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        let name_len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap()) as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|e| r.err(at, format!("name is not UTF-8: {e}")))?
            .to_owned();
        let tensor = if rank == 0 {
            Tensor::new(vec![1], data)?
        } else {
            Tensor::new(shape, data)?
        };
        out.push(NamedTensor {
            name,
            dtype,
            tensor,
        });
    }
    Ok(out)
}

pub fn write(path: impl AsRef<Path>, records: &[NamedTensor]) -> Result<()> {
    fs::write(path, encode(records)?)?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>> {
    decode(&fs::read(path)?)
}

/// Finds a record by name.
pub fn find<'a>(records: &'a [NamedTensor], name: &str) -> Result<&'a Tensor> {
    records
        .iter()
        .find(|r| r.name == name)
        .map(|r| &r.tensor)
        .ok_or_else(|| Error::Data(format!("tensor '{name}' not found in container")))
}
