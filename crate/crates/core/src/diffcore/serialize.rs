//! Flat binary parameter files.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "LHZ1" | entry count | { name len | name bytes | rank | dims... | f64 values... }*
//! ```

use std::io::{Read, Write};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LHZ1";

pub fn write_params<W: Write>(params: &ParamStore, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, p) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        let shape = p.value.shape();
        out.write_all(&(shape.len() as u32).to_le_bytes())?;
        for d in shape {
            out.write_all(&(*d as u32).to_le_bytes())?;
        }
        for v in p.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn params_to_bytes(params: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_params(params, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::format("parameter file", e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_params<R: Read>(mut input: R) -> Result<ParamStore> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|e| Error::format("parameter file", e.to_string()))?;
    if &magic != MAGIC {
        return Err(Error::format("parameter file", format!("bad magic {magic:?}")));
    }
    let count = read_u32(&mut input)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; len];
        input
            .read_exact(&mut name)
            .map_err(|e| Error::format("parameter file", e.to_string()))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::format("parameter file", "name is not UTF-8"))?;
        let rank = read_u32(&mut input)? as usize;
        let shape = (0..rank)
            .map(|_| read_u32(&mut input).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            input
                .read_exact(&mut b)
                .map_err(|e| Error::format("parameter file", e.to_string()))?;
            data.push(f64::from_le_bytes(b));
        }
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok(store)
}
