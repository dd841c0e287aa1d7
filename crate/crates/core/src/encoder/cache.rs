//! `DCFC` feature-cache files: one encoded video per file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::{f32_to_le, le_to_f32, parse_header, read_container, write_container};
use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

pub const CACHE_MAGIC: &[u8; 4] = b"DCFC";
pub const CACHE_VERSION: u32 = 1;
pub const CACHE_EXTENSION: &str = "dcfc";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    video_id: String,
    encoder_id: String,
    dtype: String,
    shape: [usize; 2],
}

pub fn feature_cache_bytes(fs: &FeatureSequence) -> Result<Vec<u8>> {
    let header = Header {
        video_id: fs.video_id.clone(),
        encoder_id: fs.encoder_id.clone(),
        dtype: "f32le".into(),
        shape: [fs.len(), fs.dim()],
    };
    let mut payload = Vec::new();
    f32_to_le(fs.features().data(), &mut payload);
    Ok(write_container(CACHE_MAGIC, CACHE_VERSION, &serde_json::to_vec(&header)?, &payload))
}

pub fn parse_feature_cache(bytes: &[u8]) -> Result<FeatureSequence> {
    let c = read_container(bytes, CACHE_MAGIC, CACHE_VERSION)?;
    let h: Header = parse_header(&c)?;
    if h.dtype != "f32le" {
        return Err(Error::format(12, format!("unsupported dtype '{}'", h.dtype)));
    }
    let expected = 4 * h.shape[0] * h.shape[1];
    if c.payload.len() != expected {
        return Err(Error::format(
            c.payload_offset + c.payload.len().min(expected) as u64,
            format!(
                "payload length mismatch: header shape {:?} needs {expected} bytes, found {}",
                h.shape,
                c.payload.len()
            ),
        ));
    }
    FeatureSequence::from_rows(h.shape[0], h.shape[1], le_to_f32(c.payload), h.video_id, h.encoder_id)
        .map_err(|e| Error::format(c.payload_offset, e.to_string()))
}

/// File name for a video id; path separators are replaced.
pub fn cache_file_name(video_id: &str) -> String {
    let safe: String = video_id
        .chars()
        .map(|c| if matches!(c, '/' | '\\' | ':') { '_' } else { c })
        .collect();
    format!("{safe}.{CACHE_EXTENSION}")
}

pub fn cache_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(cache_file_name(video_id))
}

pub fn write_feature_cache(fs: &FeatureSequence, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = cache_path(dir, &fs.video_id);
    std::fs::write(&path, feature_cache_bytes(fs)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_feature_cache(path: &Path) -> Result<FeatureSequence> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_feature_cache(&bytes).map_err(|e| e.context(format!("feature cache {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_seq(l: usize, d: usize) -> FeatureSequence {
        let mut r = crate::rng::rng(3);
        let data = (0..l * d).map(|_| r.random::<f32>() * 2.0 - 1.0).collect();
        FeatureSequence::from_rows(l, d, data, "vid/01", "clip-vit").unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let fs = random_seq(8, 768);
        let path = write_feature_cache(&fs, dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), "vid_01.dcfc");
        let back = load_feature_cache(&path).unwrap();
        assert_eq!(back, fs);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(feature_cache_bytes(&back).unwrap(), bytes);
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        assert_eq!(bytes.len() - 12 - header_len, 8 * 768 * 4);
    }

    #[test]
    fn truncated_payload_reports_lengths() {
        let bytes = feature_cache_bytes(&random_seq(8, 16)).unwrap();
        let e = parse_feature_cache(&bytes[..bytes.len() - 5]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("512") && msg.contains("507"), "{msg}");
        assert!(matches!(e, Error::Format { .. }));
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = feature_cache_bytes(&random_seq(2, 2)).unwrap();
        bytes[1] = b'X';
        assert!(matches!(parse_feature_cache(&bytes), Err(Error::Format { offset: 0, .. })));
    }
}
