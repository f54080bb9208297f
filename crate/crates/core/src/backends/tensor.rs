//! `ETNS` tensor files: the binary interchange format of the job protocol.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic   4 bytes  "ETNS"
//! version u32      1
//! dtype   u8       1 = f32, 2 = u8
//! ndim    u32
//! dims    ndim × u64
//! payload row-major, product(dims) × sizeof(dtype) bytes
//! ```

use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ETNS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("tensor io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("unknown dtype code {0}")]
    BadDType(u8),
    #[error("truncated header")]
    ShortHeader,
    #[error("short payload: expected {expected} bytes, found {found}")]
    ShortPayload { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("zero-sized dimension")]
    ZeroDim,
    #[error("data length {len} does not match dims {dims:?}")]
    LengthMismatch { len: usize, dims: Vec<u64> },
}

impl TensorError {
    /// Stable numeric code per failure class.
    pub fn code(&self) -> i32 {
        match self {
            TensorError::Io(_) => 10,
            TensorError::BadMagic => 11,
            TensorError::BadVersion(_) => 12,
            TensorError::BadDType(_) => 13,
            TensorError::ShortHeader => 14,
            TensorError::ShortPayload { .. } => 15,
            TensorError::TrailingBytes(_) => 16,
            TensorError::ZeroDim => 17,
            TensorError::LengthMismatch { .. } => 18,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::U8(_) => DType::U8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: TensorData,
}

impl PartialEq for Tensor {
    /// Bitwise comparison, so NaN payloads compare equal to themselves.
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && match (&self.data, &other.data) {
                (TensorData::F32(a), TensorData::F32(b)) => {
                    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
                }
                (TensorData::U8(a), TensorData::U8(b)) => a == b,
                _ => false,
            }
    }
}

impl Tensor {
    pub fn f32(dims: Vec<u64>, data: Vec<f32>) -> Result<Self, TensorError> {
        Self::new(dims, TensorData::F32(data))
    }

    pub fn u8(dims: Vec<u64>, data: Vec<u8>) -> Result<Self, TensorError> {
        Self::new(dims, TensorData::U8(data))
    }

    pub fn new(dims: Vec<u64>, data: TensorData) -> Result<Self, TensorError> {
        if dims.contains(&0) {
            return Err(TensorError::ZeroDim);
        }
        let n: u64 = dims.iter().product();
        if n as usize != data.len() {
            return Err(TensorError::LengthMismatch {
                len: data.len(),
                dims,
            });
        }
        Ok(Self { dims, data })
    }

    pub fn element_count(&self) -> usize {
        self.data.len()
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Some(v),
            _ => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let dtype = self.data.dtype();
        let mut out =
            Vec::with_capacity(13 + 8 * self.dims.len() + self.element_count() * dtype.size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(dtype as u8);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TensorError> {
        if bytes.len() < 4 {
            return Err(TensorError::ShortHeader);
        }
        if &bytes[..4] != MAGIC {
            return Err(TensorError::BadMagic);
        }
        if bytes.len() < 13 {
            return Err(TensorError::ShortHeader);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(TensorError::BadVersion(version));
        }
        let dtype = match bytes[8] {
            1 => DType::F32,
            2 => DType::U8,
            other => return Err(TensorError::BadDType(other)),
        };
        let ndim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let header_len = 13 + 8 * ndim;
        if bytes.len() < header_len {
            return Err(TensorError::ShortHeader);
        }
        let dims: Vec<u64> = (0..ndim)
            .map(|k| u64::from_le_bytes(bytes[13 + 8 * k..21 + 8 * k].try_into().unwrap()))
            .collect();
        if dims.contains(&0) {
            return Err(TensorError::ZeroDim);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or(TensorError::ShortPayload {
                expected: usize::MAX,
                found: bytes.len() - header_len,
            })?;
        let expected = count * dtype.size();
        let payload = &bytes[header_len..];
        if payload.len() < expected {
            return Err(TensorError::ShortPayload {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(TensorError::TrailingBytes(payload.len() - expected));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U8 => TensorData::U8(payload.to_vec()),
        };
        Ok(Self { dims, data })
    }
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<(), TensorError> {
    std::fs::write(path, tensor.encode())?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorError> {
    Tensor::decode(&std::fs::read(path)?)
}
