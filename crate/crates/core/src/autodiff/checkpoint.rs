//! Parameter checkpoint container.
//!
//! Layout (little-endian): magic `2PCK`, `u32` version, `u32` entry count, then
//! per entry: `u32` name length, UTF-8 name, `u8` dtype code, `u32` rank,
//! `rank` x `u32` extents, and the raw values. Trainable parameters come
//! first, followed by state buffers.

use thiserror::Error;

use super::param::ParamStore;
use super::tensor::{DType, Real, Tensor};

const MAGIC: &[u8; 4] = b"2PCK";
const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown dtype code {0}")]
    UnknownDType(u8),
    #[error("entry name is not valid UTF-8")]
    BadName,
    #[error("checkpoint does not match model: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub dtype: DType,
    pub values: Tensor<f64>,
}

pub fn write_checkpoint<T: Real>(store: &ParamStore<T>) -> Vec<u8> {
    let entries: Vec<(&str, &Tensor<T>)> = store
        .params()
        .iter()
        .map(|p| (p.name.as_str(), &p.value))
        .chain(store.buffers().iter().map(|b| (b.name.as_str(), &b.value)))
        .collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, value) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(T::DTYPE.code());
        out.extend_from_slice(&(value.rank() as u32).to_le_bytes());
        for &e in value.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &x in value.data() {
            match T::DTYPE {
                DType::F32 => out.extend_from_slice(&(x.as_f64() as f32).to_le_bytes()),
                DType::F64 => out.extend_from_slice(&x.as_f64().to_le_bytes()),
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated(self.pos))?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated(self.pos))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Vec<CheckpointEntry>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::BadName)?
            .to_string();
        let code = r.take(1)?[0];
        let dtype = DType::from_code(code).ok_or(CheckpointError::UnknownDType(code))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::new();
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or(CheckpointError::Truncated(r.pos))?;
        let raw = r.take(len.checked_mul(dtype.size()).ok_or(CheckpointError::Truncated(r.pos))?)?;
        let data: Vec<f64> = match dtype {
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        entries.push(CheckpointEntry {
            name,
            dtype,
            values: Tensor::new(&shape, data).expect("length checked"),
        });
    }
    Ok(entries)
}

impl<T: Real> ParamStore<T> {
    /// Overwrites parameters and buffers from checkpoint bytes, matching by name and shape.
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), CheckpointError> {
        let entries = read_checkpoint(bytes)?;
        let expected = self.params().len() + self.buffers().len();
        if entries.len() != expected {
            return Err(CheckpointError::Mismatch(format!(
                "{} entries in file, model has {expected}",
                entries.len()
            )));
        }
        let (pe, be) = entries.split_at(self.params().len());
        for (p, e) in self.params_mut().iter_mut().zip(pe) {
            if p.name != e.name || p.value.shape() != e.values.shape() {
                return Err(CheckpointError::Mismatch(format!(
                    "expected {} {:?}, found {} {:?}",
                    p.name,
                    p.value.shape(),
                    e.name,
                    e.values.shape()
                )));
            }
            p.value = e.values.cast();
        }
        for (b, e) in self.buffers_mut().iter_mut().zip(be) {
            if b.name != e.name || b.value.shape() != e.values.shape() {
                return Err(CheckpointError::Mismatch(format!(
                    "expected buffer {}, found {}",
                    b.name, e.name
                )));
            }
            b.value = e.values.cast();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store_with(values: Vec<f32>) -> ParamStore<f32> {
        let mut s = ParamStore::new();
        let n = values.len();
        s.add("layer.weight", Tensor::new(&[n], values).unwrap(), true);
        s.add("layer.bias", Tensor::zeros(&[2, 1]), false);
        s.add_buffer("bn.running_var", Tensor::ones(&[3]));
        s
    }

    #[test]
    fn header_layout() {
        let bytes = write_checkpoint(&store_with(vec![1.0]));
        assert_eq!(&bytes[..4], b"2PCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 12);
        assert_eq!(&bytes[16..28], b"layer.weight");
        assert_eq!(bytes[28], 0);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = write_checkpoint(&store_with(vec![1.0, 2.0]));
        // the running_var payload (3 x f32) is the last 12 bytes
        let cut = &bytes[..bytes.len() - 1];
        assert_eq!(read_checkpoint(cut).unwrap_err(), CheckpointError::Truncated(bytes.len() - 12));
        bytes[0] = b'X';
        assert_eq!(read_checkpoint(&bytes).unwrap_err(), CheckpointError::BadMagic);
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let bytes = write_checkpoint(&store_with(vec![1.0, 2.0]));
        let mut other = store_with(vec![1.0, 2.0, 3.0]);
        assert!(matches!(other.load_checkpoint(&bytes), Err(CheckpointError::Mismatch(_))));
    }

    proptest! {
        #[test]
        fn roundtrip_bit_exact(values in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
            let src = store_with(values);
            let bytes = write_checkpoint(&src);
            let mut dst = store_with(vec![0.0; src.params()[0].value.len()]);
            dst.load_checkpoint(&bytes).unwrap();
            for (a, b) in src.params().iter().zip(dst.params()) {
                prop_assert_eq!(a.value.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                                b.value.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            }
        }
    }
}
