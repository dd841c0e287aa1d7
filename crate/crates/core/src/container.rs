//! Binary container shared by checkpoints, feature caches and native encoder
//! weights:
//!
//! ```text
//! magic[4] | version u32le | header_len u32le | header (UTF-8 JSON) | payload
//! ```
//!
//! Tensor payloads are f32 little-endian; the JSON header records where each
//! tensor starts relative to the first payload byte.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PREAMBLE_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

pub fn write_container(magic: &[u8; 4], version: u32, header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(payload);
    out
}

/// Parsed container: header bytes and payload slice, with the payload's file offset.
pub struct Container<'a> {
    pub version: u32,
    pub header: &'a [u8],
    pub payload: &'a [u8],
    pub payload_offset: u64,
}

pub fn read_container<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
    supported_version: u32,
) -> Result<Container<'a>> {
    if bytes.len() < PREAMBLE_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file too short: {} bytes, need at least {PREAMBLE_LEN}", bytes.len()),
        ));
    }
    if &bytes[0..4] != magic {
        return Err(Error::format(
            0,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[0..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != supported_version {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {supported_version}"),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = PREAMBLE_LEN + header_len;
    if bytes.len() < header_end {
        return Err(Error::format(
            bytes.len() as u64,
            format!("header truncated: expected {header_len} header bytes, found {}", bytes.len() - PREAMBLE_LEN),
        ));
    }
    Ok(Container {
        version,
        header: &bytes[PREAMBLE_LEN..header_end],
        payload: &bytes[header_end..],
        payload_offset: header_end as u64,
    })
}

pub fn parse_header<'a, H: Deserialize<'a>>(c: &Container<'a>) -> Result<H> {
    serde_json::from_slice(c.header)
        .map_err(|e| Error::format(PREAMBLE_LEN as u64, format!("invalid JSON header: {e}")))
}

pub fn f32_to_le(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn le_to_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Lays out named tensors back to back, returning the directory and payload.
pub fn pack_tensors<'a, I>(tensors: I) -> (Vec<TensorEntry>, Vec<u8>)
where
    I: IntoIterator<Item = (String, &'a Tensor<f32>)>,
{
    let mut dir = Vec::new();
    let mut payload = Vec::new();
    for (name, t) in tensors {
        dir.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            offset: payload.len() as u64,
        });
        f32_to_le(t.data(), &mut payload);
    }
    (dir, payload)
}

/// Reads one directory entry out of a payload, checking bounds.
pub fn unpack_tensor(c: &Container<'_>, entry: &TensorEntry) -> Result<Tensor<f32>> {
    let n: usize = entry.shape.iter().product();
    let start = entry.offset as usize;
    let end = start + 4 * n;
    if end > c.payload.len() {
        return Err(Error::format(
            c.payload_offset + c.payload.len() as u64,
            format!(
                "tensor '{}' truncated: expected payload bytes {start}..{end}, payload has {}",
                entry.name,
                c.payload.len()
            ),
        ));
    }
    let t = Tensor::from_vec(&entry.shape, le_to_f32(&c.payload[start..end]))?;
    if !t.is_finite() {
        return Err(Error::format(
            c.payload_offset + entry.offset,
            format!("tensor '{}' contains non-finite values", entry.name),
        ));
    }
    Ok(t)
}
