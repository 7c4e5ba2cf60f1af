//! MMKF feature files, little-endian:
//!
//! ```text
//! "MMKF" | u32 version = 1 | u32 record count | u32 dim
//! record*: u32 entity id | dim × f32
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use mmkge_core::{FeatureTable, Provenance};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MMKF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub records: u32,
    pub dim: u32,
}

impl Header {
    pub fn record_len(&self) -> u64 {
        4 + 4 * u64::from(self.dim)
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN as u64 + u64::from(self.records) * self.record_len()
    }
}

/// Size in bytes of a file holding `records` vectors of length `dim`.
pub fn file_len(records: usize, dim: usize) -> u64 {
    Header { version: VERSION, records: records as u32, dim: dim as u32 }.file_len()
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: bytes[..bytes.len().min(4)].to_vec() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let header = Header { version: u32_at(bytes, 4), records: u32_at(bytes, 8), dim: u32_at(bytes, 12) };
    if header.version != VERSION {
        return Err(Error::UnsupportedVersion { format: "MMKF", found: header.version });
    }
    if header.dim == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(header)
}

/// Decoded file contents. Vectors keep their on-disk bit patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Records {
    pub dim: usize,
    pub records: Vec<(u32, Vec<f32>)>,
}

/// Decodes a whole file. Checks framing and duplicate ids; id bounds need
/// the graph and are checked by [`load_features`].
pub fn decode(bytes: &[u8]) -> Result<Records> {
    let header = parse_header(bytes)?;
    let expected = header.file_len();
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes(found - expected));
    }
    let dim = header.dim as usize;
    let mut seen = HashSet::with_capacity(header.records as usize);
    let mut records = Vec::with_capacity(header.records as usize);
    for rec in bytes[HEADER_LEN..].chunks_exact(4 + 4 * dim) {
        let id = u32_at(rec, 0);
        if !seen.insert(id) {
            return Err(Error::DuplicateRecord(id));
        }
        let v = rec[4..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        records.push((id, v));
    }
    Ok(Records { dim, records })
}

pub fn encode(dim: usize, records: &[(u32, &[f32])]) -> Vec<u8> {
    let mut out = Vec::with_capacity(file_len(records.len(), dim) as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for (id, v) in records {
        assert_eq!(v.len(), dim, "record {id} has the wrong length");
        out.extend_from_slice(&id.to_le_bytes());
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Encodes every entity of the table except Xavier fallbacks, in id order.
pub fn encode_table(table: &FeatureTable) -> Vec<u8> {
    let records: Vec<(u32, &[f32])> = (0..table.entity_count() as u32)
        .filter(|&e| table.provenance(e) != Provenance::XavierFallback)
        .map(|e| (e, table.get(e)))
        .collect();
    encode(table.dim(), &records)
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    fs::write(path, encode_table(table)).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_ids(records: &Records, entity_count: usize) -> Result<()> {
    match records.records.iter().find(|(id, _)| *id as usize >= entity_count) {
        Some((id, _)) => Err(Error::RecordOutOfRange { id: *id, count: entity_count }),
        None => Ok(()),
    }
}

/// Loads features for `entity_count` entities. Entities missing from the
/// file get seeded Xavier vectors flagged as fallback.
pub fn load_features(path: &Path, entity_count: usize, fallback_seed: u64) -> Result<FeatureTable> {
    from_bytes(&read(path)?, entity_count, fallback_seed)
}

pub fn from_bytes(bytes: &[u8], entity_count: usize, fallback_seed: u64) -> Result<FeatureTable> {
    let records = decode(bytes)?;
    check_ids(&records, entity_count)?;
    let dim = records.dim;
    Ok(FeatureTable::from_records(entity_count, dim, records.records, fallback_seed)?)
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Validation {
    pub dim: usize,
    pub records: usize,
    pub entity_count: usize,
    /// Entities without a record (they would fall back to Xavier vectors).
    pub missing: Vec<u32>,
    pub non_finite: Vec<u32>,
}

impl Validation {
    pub fn full_coverage(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.non_finite.is_empty()
    }
}

/// Format checker for feature producers: framing, ids, finiteness and
/// coverage of `entity_count` entities.
pub fn validate(path: &Path, entity_count: usize) -> Result<Validation> {
    let records = decode(&read(path)?)?;
    check_ids(&records, entity_count)?;
    let mut covered = vec![false; entity_count];
    let mut non_finite = Vec::new();
    for (id, v) in &records.records {
        covered[*id as usize] = true;
        if v.iter().any(|x| !x.is_finite()) {
            non_finite.push(*id);
        }
    }
    non_finite.sort_unstable();
    Ok(Validation {
        dim: records.dim,
        records: records.records.len(),
        entity_count,
        missing: (0..entity_count as u32).filter(|&e| !covered[e as usize]).collect(),
        non_finite,
    })
}
