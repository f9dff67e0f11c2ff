//! AEBF binary tensors.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "AEBF"
//! 4       2           version (u16 LE) = 1
//! 6       1           rank (u8, >= 1)
//! 7       4 * rank    dims (u32 LE each)
//! ..      4 * prod    payload, f32 LE, row-major, last dim fastest
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Kernel};

pub const MAGIC: &[u8; 4] = b"AEBF";
pub const VERSION: u16 = 1;

/// Shape plus values, stored at 64-bit precision in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(Error::config(format!(
                "tensor rank must be 1..=255, got {}",
                dims.len()
            )));
        }
        let n = element_count(&dims).ok_or_else(|| Error::config("tensor dims overflow"))?;
        if n != data.len() {
            return Err(Error::config(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::config(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ferr = |offset: usize, message: &str| Error::Format {
            offset,
            message: message.to_string(),
        };
        if bytes.len() < 4 {
            return Err(ferr(bytes.len(), "file shorter than magic"));
        }
        if &bytes[..4] != MAGIC {
            return Err(ferr(0, "bad magic, expected \"AEBF\""));
        }
        if bytes.len() < 7 {
            return Err(ferr(bytes.len(), "truncated header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(ferr(4, &format!("unsupported version {version}")));
        }
        let rank = bytes[6] as usize;
        if rank == 0 {
            return Err(ferr(6, "rank must be at least 1"));
        }
        let header_end = 7 + 4 * rank;
        if bytes.len() < header_end {
            return Err(ferr(bytes.len(), "truncated dims"));
        }
        let dims: Vec<usize> = bytes[7..header_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let n = element_count(&dims)
            .and_then(|n| n.checked_mul(4).map(|b| (n, b)))
            .ok_or_else(|| ferr(7, "dims product overflows"))?;
        let (count, payload_bytes) = n;
        let expected_end = header_end
            .checked_add(payload_bytes)
            .ok_or_else(|| ferr(7, "dims product overflows"))?;
        if bytes.len() < expected_end {
            return Err(ferr(
                bytes.len(),
                &format!("truncated payload: expected {payload_bytes} bytes after offset {header_end}"),
            ));
        }
        if bytes.len() > expected_end {
            return Err(ferr(expected_end, "trailing bytes after payload"));
        }
        let mut data = Vec::with_capacity(count);
        for (k, c) in bytes[header_end..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !v.is_finite() {
                return Err(ferr(header_end + 4 * k, "non-finite value in payload"));
            }
            data.push(v as f64);
        }
        Ok(Tensor { dims, data })
    }

    /// Rank 3 is `(C, H, W)`; rank 2 is read as a single channel.
    pub fn into_feature_map(self) -> Result<FeatureMap> {
        match self.dims.as_slice() {
            &[c, h, w] => FeatureMap::from_vec(c, h, w, self.data),
            &[h, w] => FeatureMap::from_vec(1, h, w, self.data),
            d => Err(Error::config(format!("feature maps are rank 2 or 3, got dims {d:?}"))),
        }
    }

    /// Rank 4 `(out, in, k, k)`.
    pub fn into_kernel(self) -> Result<Kernel> {
        match self.dims.as_slice() {
            &[o, i, k1, k2] if k1 == k2 => Kernel::new(o, i, k1, self.data),
            d => Err(Error::config(format!(
                "kernels are rank 4 (out, in, k, k), got dims {d:?}"
            ))),
        }
    }
}

impl From<&FeatureMap> for Tensor {
    fn from(m: &FeatureMap) -> Self {
        Tensor {
            dims: vec![m.channels(), m.height(), m.width()],
            data: m.data().to_vec(),
        }
    }
}

impl From<&Kernel> for Tensor {
    fn from(k: &Kernel) -> Self {
        Tensor {
            dims: vec![k.out_channels(), k.in_channels(), k.extent(), k.extent()],
            data: k.weights().to_vec(),
        }
    }
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

pub fn write_tensor_file(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tensor.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureMap> {
    read_tensor_file(path)?.into_feature_map()
}

pub fn write_tensor(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write_tensor_file(&Tensor::from(map), path)
}
