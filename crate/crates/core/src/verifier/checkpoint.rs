//! `DCOF` checkpoint files: verifier config, encoder id and f32 weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{
    pack_tensors, parse_header, read_container, unpack_tensor, write_container, TensorEntry,
};
use crate::error::{Error, Result};

use super::{VerifierConfig, VerifierParams};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DCOF";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder_id: String,
    pub params: VerifierParams<f32>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: VerifierConfig,
    encoder_id: String,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn new(encoder_id: impl Into<String>, params: VerifierParams<f32>) -> Self {
        Checkpoint { encoder_id: encoder_id.into(), params }
    }

    pub fn config(&self) -> &VerifierConfig {
        &self.params.config
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (tensors, payload) = pack_tensors(self.params.named());
        let header = Header {
            config: self.params.config.clone(),
            encoder_id: self.encoder_id.clone(),
            tensors,
        };
        let header = serde_json::to_vec(&header)?;
        Ok(write_container(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &header, &payload))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = read_container(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let header: Header = parse_header(&c)?;
        header
            .config
            .validate()
            .map_err(|e| Error::format(c.payload_offset, format!("checkpoint config invalid: {e}")))?;
        let mut params = VerifierParams::<f32>::zeros(&header.config)?;
        let expected: Vec<(String, Vec<usize>)> = params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != header.tensors.len() {
            return Err(Error::format(
                c.payload_offset,
                format!(
                    "checkpoint lists {} tensors, config implies {}",
                    header.tensors.len(),
                    expected.len()
                ),
            ));
        }
        let mut end = 0u64;
        for (((name, shape), entry), slot) in
            expected.iter().zip(&header.tensors).zip(params.tensors_mut())
        {
            if &entry.name != name || &entry.shape != shape {
                return Err(Error::format(
                    c.payload_offset + entry.offset,
                    format!(
                        "tensor directory mismatch: found '{}' {:?}, expected '{name}' {shape:?}",
                        entry.name, entry.shape
                    ),
                ));
            }
            *slot = unpack_tensor(&c, entry)?;
            end = end.max(entry.offset + 4 * slot.len() as u64);
        }
        if end != c.payload.len() as u64 {
            return Err(Error::format(
                c.payload_offset + end,
                format!("{} trailing payload bytes", c.payload.len() as u64 - end),
            ));
        }
        Ok(Checkpoint { encoder_id: header.encoder_id, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
