//! MMKC checkpoints, little-endian:
//!
//! ```text
//! "MMKC" | u32 version = 1 | u32 entity_count | u32 relation_count | u32 d_e | u32 d_m
//! f32 struct_emb[entity_count × d_e] | f32 rel_emb[relation_count × d_e] | f32 proj[d_e × d_m]
//! ```

use std::fs;
use std::path::Path;

use mmkge_core::{Dims, ModelParams};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MMKC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

pub fn file_len(dims: Dims) -> u64 {
    let floats = (dims.entity_count + dims.relation_count) as u64 * dims.d_e as u64 + (dims.d_e * dims.d_m) as u64;
    HEADER_LEN as u64 + 4 * floats
}

pub fn encode(params: &ModelParams<f32>) -> Vec<u8> {
    let dims = params.dims();
    let mut out = Vec::with_capacity(file_len(dims) as usize);
    out.extend_from_slice(&MAGIC);
    for v in [VERSION as usize, dims.entity_count, dims.relation_count, dims.d_e, dims.d_m] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for t in [&params.struct_emb, &params.rel_emb, &params.proj] {
        for x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Dimensions stored in a checkpoint header.
pub fn decode_header(bytes: &[u8]) -> Result<Dims> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: bytes[..bytes.len().min(4)].to_vec() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if word(1) != VERSION {
        return Err(Error::UnsupportedVersion { format: "MMKC", found: word(1) });
    }
    let dims = Dims::new(word(2) as usize, word(3) as usize, word(4) as usize, word(5) as usize);
    dims.validate()?;
    Ok(dims)
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let dims = decode_header(bytes)?;
    let expected = file_len(dims);
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes(found - expected));
    }
    let mut floats = bytes[HEADER_LEN..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let mut take = |n: usize| floats.by_ref().take(n).collect::<Vec<f32>>();
    let s = take(dims.entity_count * dims.d_e);
    let r = take(dims.relation_count * dims.d_e);
    let p = take(dims.d_e * dims.d_m);
    Ok(ModelParams::from_parts(dims, s, r, p)?)
}

pub fn save(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams<f32>> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
