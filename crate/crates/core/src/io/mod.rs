//! On-disk formats.
//!
//! Descriptor files are little-endian binary:
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 8    | magic `NSDVPR01`                             |
//! | 8      | 8    | row count, `u64`                             |
//! | 16     | 4    | descriptor dimension, `u32`                  |
//! | 20     | 4    | flags, `u32`; bit 0 marks a composite file   |
//! | 24     | ...  | row-major `f32` payload                      |
//!
//! Composite files store rows of `2 * dim` values, left half first.
//! Everything else (traverses, ground truth, matches, curves) is CSV.

mod tables;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::descriptor::{CompositeSet, DescriptorSet};
use crate::error::{Error, Result};

pub use tables::*;

pub const MAGIC: &[u8; 8] = b"NSDVPR01";
pub const HEADER_LEN: usize = 24;
pub const FLAG_COMPOSITE: u32 = 1;

/// Contents of a descriptor file.
#[derive(Debug, Clone, PartialEq)]
pub enum DescriptorFile {
    Whole(DescriptorSet),
    Composite(CompositeSet),
}

impl DescriptorFile {
    /// Whole descriptors, reading composite rows as `left ++ right`.
    pub fn into_whole(self) -> DescriptorSet {
        match self {
            DescriptorFile::Whole(s) => s,
            DescriptorFile::Composite(c) => c.to_whole(),
        }
    }

    pub fn into_composite(self) -> Result<CompositeSet> {
        match self {
            DescriptorFile::Composite(c) => Ok(c),
            DescriptorFile::Whole(_) => Err(Error::invalid("expected a composite descriptor file")),
        }
    }
}

fn header(count: usize, dim: usize, flags: u32) -> Result<[u8; HEADER_LEN]> {
    let dim =
        u32::try_from(dim).map_err(|_| Error::invalid(format!("dimension {dim} exceeds u32")))?;
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    h[8..16].copy_from_slice(&(count as u64).to_le_bytes());
    h[16..20].copy_from_slice(&dim.to_le_bytes());
    h[20..24].copy_from_slice(&flags.to_le_bytes());
    Ok(h)
}

pub fn encode_descriptors(set: &DescriptorSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.as_slice().len());
    out.extend_from_slice(&header(set.count(), set.dim(), 0)?);
    for v in set.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_composites(set: &CompositeSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * set.left().as_slice().len());
    out.extend_from_slice(&header(set.count(), set.half_dim(), FLAG_COMPOSITE)?);
    for (l, r) in set.iter() {
        for v in l.iter().chain(r) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses and validates a complete descriptor file image.
pub fn decode(bytes: &[u8]) -> Result<DescriptorFile> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::NotDescriptorFile);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptDescriptorFile(format!(
            "header is {} bytes, expected {HEADER_LEN}",
            bytes.len()
        )));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let flags = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if dim == 0 {
        return Err(Error::CorruptDescriptorFile("dimension is zero".into()));
    }
    if flags & !FLAG_COMPOSITE != 0 {
        return Err(Error::CorruptDescriptorFile(format!(
            "unknown flags {flags:#x}"
        )));
    }
    let composite = flags & FLAG_COMPOSITE != 0;
    let row_len = if composite { 2 * dim } else { dim };
    let payload = &bytes[HEADER_LEN..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(row_len))
        .and_then(|n| n.checked_mul(4));
    if expected != Some(payload.len()) {
        return Err(Error::CorruptDescriptorFile(format!(
            "header declares {count} rows of {row_len} values but the payload is {} bytes",
            payload.len()
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(p) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: p / row_len,
            dim: p % row_len,
        });
    }
    if !composite {
        return Ok(DescriptorFile::Whole(DescriptorSet::from_rows(
            dim, values,
        )?));
    }
    let mut left = Vec::with_capacity(values.len() / 2);
    let mut right = Vec::with_capacity(values.len() / 2);
    for row in values.chunks_exact(row_len) {
        left.extend_from_slice(&row[..dim]);
        right.extend_from_slice(&row[dim..]);
    }
    Ok(DescriptorFile::Composite(CompositeSet::new(
        DescriptorSet::from_rows(dim, left)?,
        DescriptorSet::from_rows(dim, right)?,
    )?))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_descriptors(path: impl AsRef<Path>, set: &DescriptorSet) -> Result<()> {
    write_bytes(path.as_ref(), &encode_descriptors(set)?)
}

pub fn write_composites(path: impl AsRef<Path>, set: &CompositeSet) -> Result<()> {
    write_bytes(path.as_ref(), &encode_composites(set)?)
}

pub fn read_descriptor_file(path: impl AsRef<Path>) -> Result<DescriptorFile> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads any descriptor file as whole descriptors.
pub fn read_descriptors(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    Ok(read_descriptor_file(path)?.into_whole())
}
