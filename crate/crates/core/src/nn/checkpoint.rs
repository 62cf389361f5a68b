//! Flat binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "RMCK" | version: u32 | count: u64
//! count × { name_len: u32 | name | rank: u32 | extents: u64 × rank | f32 × Π extents }
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::network::Network;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RMCK";
pub const VERSION: u32 = 1;

const AUX_PREFIX: &str = "aux_head.";

pub fn encode<T: Scalar, W: Write>(records: &[(String, &Tensor<T>)], out: &mut W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(records.len() as u64).to_le_bytes())?;
    for (name, t) in records {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &e in t.shape() {
            out.write_all(&(e as u64).to_le_bytes())?;
        }
        for &v in t.data() {
            out.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize>(src: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    src.read_exact(&mut buf).map_err(|e| Error::InvalidArgument(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

pub fn decode(src: &mut impl Read) -> Result<Vec<(String, Tensor<f32>)>> {
    if &read_array::<4>(src)? != MAGIC {
        return Err(Error::InvalidArgument("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(src)?);
    if version != VERSION {
        return Err(Error::InvalidArgument(format!("unsupported checkpoint version {version}")));
    }
    let count = u64::from_le_bytes(read_array(src)?);
    let mut records = Vec::new();
    for _ in 0..count {
        let len = u32::from_le_bytes(read_array(src)?) as usize;
        let mut name = vec![0u8; len];
        src.read_exact(&mut name)
            .map_err(|e| Error::InvalidArgument(format!("truncated checkpoint: {e}")))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::InvalidArgument("checkpoint name is not utf-8".into()))?;
        let rank = u32::from_le_bytes(read_array(src)?) as usize;
        let shape = (0..rank)
            .map(|_| read_array(src).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| read_array(src).map(f32::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        records.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(records)
}

/// Writes all parameters of `model`. With `deploy` set, the auxiliary RoI
/// head is left out.
pub fn save<T: Scalar>(model: &Network<T>, path: &Path, deploy: bool) -> Result<()> {
    let records: Vec<_> = model
        .params()
        .into_iter()
        .filter(|(name, _)| !(deploy && name.starts_with(AUX_PREFIX)))
        .collect();
    let mut buf = Vec::new();
    encode(&records, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&mut bytes.as_slice())
}

/// Copies matching records into `model`. Every non-auxiliary parameter must
/// be present with the right shape; the auxiliary head is optional.
pub fn restore<T: Scalar>(model: &mut Network<T>, records: &[(String, Tensor<f32>)]) -> Result<()> {
    for (name, param) in model.params_mut() {
        match records.iter().find(|(n, _)| *n == name) {
            Some((_, t)) if t.shape() == param.shape() => {
                for (dst, &src) in param.data_mut().iter_mut().zip(t.data()) {
                    *dst = T::from_f64_lossy(src as f64);
                }
            }
            Some((_, t)) => return Err(Error::shape("checkpoint restore", param.shape(), t.shape())),
            None if name.starts_with(AUX_PREFIX) => {}
            None => return Err(Error::InvalidArgument(format!("checkpoint lacks parameter {name}"))),
        }
    }
    Ok(())
}
