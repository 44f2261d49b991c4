//! Versioned little-endian binary checkpoints.
//!
//! Layout: `b"DLLMCKPT"`, `u32` version, `u32` parameter count, then per
//! parameter: `u32` name length, UTF-8 name, `u32` rank, `u32` dims, `f64`
//! values.

use std::io::{Read, Write};

use super::params::ParameterSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DLLMCKPT";
pub const VERSION: u32 = 1;

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(w: &mut W, entries: &[(String, &Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| ck(format!("truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| ck("missing magic"))?;
    if &magic != MAGIC {
        return Err(ck("bad magic"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(ck(format!("unsupported version {version}")));
    }
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| ck("truncated name"))?;
        let name = String::from_utf8(name).map_err(|_| ck("name is not UTF-8"))?;
        let rank = read_u32(r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u32(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b).map_err(|_| ck("truncated values"))?;
            data.push(f64::from_le_bytes(b));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

/// Entries for a parameter set, each name prefixed with `prefix`.
pub fn entries<'a>(prefix: &str, params: &'a ParameterSet) -> Vec<(String, &'a Tensor)> {
    params
        .iter()
        .map(|p| (format!("{prefix}{}", p.name), &p.value))
        .collect()
}

/// Restores every parameter of `params` from `loaded` by prefixed name.
pub fn restore(prefix: &str, params: &mut ParameterSet, loaded: &[(String, Tensor)]) -> Result<()> {
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let name = format!("{prefix}{}", params.param(id).name);
        let (_, t) = loaded
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ck(format!("missing parameter `{name}`")))?;
        if t.shape() != params.value(id).shape() {
            return Err(ck(format!(
                "shape mismatch for `{name}`: {:?} vs {:?}",
                t.shape(),
                params.value(id).shape()
            )));
        }
        *params.value_mut(id) = t.clone();
    }
    Ok(())
}
