//! `XLG1` binary container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      b"XLG1"
//! count      u32                 number of tensors
//! per tensor:
//!   name_len u16, name utf-8 bytes
//!   ndim     u32
//!   dims     ndim x u64
//!   payload  prod(dims) x f64, row-major
//! ```
//!
//! Integer and boolean tensors (labels, masks) are stored as `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"XLG1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                format!("{expected} elements for shape {shape:?}"),
                data.len(),
            ));
        }
        Ok(Tensor {
            name: name.into(),
            shape,
            data,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub tensors: Vec<Tensor>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Container(format!("missing tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Self::read_from(&mut bytes)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |e: std::io::Error| Error::Container(format!("truncated container: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::Container(format!("bad magic bytes {magic:?}")));
        }
        let count = read_u32(r).map_err(bad)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len).map_err(bad)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut name).map_err(bad)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Container("tensor name is not utf-8".into()))?;
            let ndim = read_u32(r).map_err(bad)? as usize;
            let mut shape = Vec::with_capacity(ndim.min(16));
            for _ in 0..ndim {
                let mut d = [0u8; 8];
                r.read_exact(&mut d).map_err(bad)?;
                shape.push(u64::from_le_bytes(d) as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n.min(1 << 24));
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf).map_err(bad)?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Container { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut c = Container::new();
        c.push(Tensor::new("y", vec![2], vec![1.0, 2.0]).unwrap());
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"XLG1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        // 4 magic + 4 count + 2 + 1 name + 4 ndim + 8 dim + 16 payload
        assert_eq!(bytes.len(), 39);
        assert_eq!(f64::from_le_bytes(bytes[31..39].try_into().unwrap()), 2.0);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(Container::from_bytes(b"XLG2\0\0\0\0").is_err());
        let mut c = Container::new();
        c.push(Tensor::new("x", vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new("x", vec![2, 2], vec![0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>(), name in "[a-z_]{0,12}") {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| (seed.wrapping_mul(i as u64 + 1) as f64) * 1e-9 - 3.5)
                .collect();
            let mut c = Container::new();
            c.push(Tensor::new(name, vec![rows, cols], data).unwrap());
            c.push(Tensor::new("scalar", vec![], vec![f64::MIN_POSITIVE]).unwrap());
            let back = Container::from_bytes(&c.to_bytes()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
