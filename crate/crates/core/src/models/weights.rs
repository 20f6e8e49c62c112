//! Flat binary weight container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic     4 bytes  "GPMW"
//! version   u32      1
//! seed      u64
//! count     u32      number of matrices
//! dims      count x (rows u32, cols u32)
//! data      per matrix, rows*cols f64 in row-major order, declared order
//! ```
//!
//! Vectors are stored as `len x 1` matrices.

use std::path::Path;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GPMW";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightFile {
    pub seed: u64,
    pub matrices: Vec<Tensor<f64>>,
}

fn rows_cols(t: &Tensor<f64>) -> (u32, u32) {
    match t.shape() {
        [r, c] => (*r as u32, *c as u32),
        _ => (t.len() as u32, 1),
    }
}

impl WeightFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.matrices.len() as u32).to_le_bytes());
        for m in &self.matrices {
            let (r, c) = rows_cols(m);
            out.extend_from_slice(&r.to_le_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
        for m in &self.matrices {
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let chunk = bytes
                .get(pos..pos + n)
                .ok_or_else(|| Error::format(origin, "truncated weight file"))?;
            pos += n;
            Ok(chunk)
        };
        if take(4)? != MAGIC {
            return Err(Error::format(origin, "bad magic, expected GPMW"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != VERSION {
            return Err(Error::format(origin, format!("unsupported version {version}")));
        }
        let seed = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        let count = u32_at(take(4)?) as usize;
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            let r = u32_at(take(4)?) as usize;
            let c = u32_at(take(4)?) as usize;
            dims.push((r, c));
        }
        let mut matrices = Vec::with_capacity(count);
        for (r, c) in dims {
            let raw = take(r * c * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            matrices.push(Tensor::new(vec![r, c], data).map_err(|e| Error::format(origin, e.to_string()))?);
        }
        if pos != bytes.len() {
            return Err(Error::format(origin, "trailing bytes after weight data"));
        }
        Ok(Self { seed, matrices })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
