//! Wire format between the crate and an external encoder process.
//!
//! ```text
//! request  (stdin):  "DCRQ" | L u32le | H u32le (224) | W u32le (224) | L·H·W·3 f32le
//! response (stdout): "DCRS" | L u32le | D u32le | L·D f32le
//! ```
//! Pixels are RGB in [0, 1], row-major with interleaved channels.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const REQUEST_MAGIC: &[u8; 4] = b"DCRQ";
pub const RESPONSE_MAGIC: &[u8; 4] = b"DCRS";
pub const FRAME_SIZE: usize = 224;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeRequest {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeResponse {
    pub frames: usize,
    pub dim: usize,
    pub features: Vec<f32>,
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    crate::container::f32_to_le(values, &mut buf);
    w.write_all(&buf)
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(crate::container::le_to_f32(&buf))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::format(
            0,
            format!("expected {:?}, got {:?}", String::from_utf8_lossy(magic), String::from_utf8_lossy(&m)),
        ));
    }
    Ok(())
}

pub fn write_request<W: Write>(w: &mut W, req: &EncodeRequest) -> Result<()> {
    if req.pixels.len() != req.frames * req.height * req.width * 3 {
        return Err(Error::Dimension("request pixel count does not match its header".into()));
    }
    w.write_all(REQUEST_MAGIC)?;
    for v in [req.frames, req.height, req.width] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    write_f32s(w, &req.pixels)?;
    w.flush()?;
    Ok(())
}

/// Reads one request; `Ok(None)` on a clean end of stream.
pub fn read_request<R: Read>(r: &mut R) -> Result<Option<EncodeRequest>> {
    let mut m = [0u8; 4];
    match r.read(&mut m[..1])? {
        0 => return Ok(None),
        _ => r.read_exact(&mut m[1..])?,
    }
    if &m != REQUEST_MAGIC {
        return Err(Error::format(0, "bad request magic"));
    }
    let frames = read_u32(r)? as usize;
    let height = read_u32(r)? as usize;
    let width = read_u32(r)? as usize;
    let pixels = read_f32s(r, frames * height * width * 3)?;
    Ok(Some(EncodeRequest { frames, height, width, pixels }))
}

pub fn write_response<W: Write>(w: &mut W, resp: &EncodeResponse) -> Result<()> {
    if resp.features.len() != resp.frames * resp.dim {
        return Err(Error::Dimension("response feature count does not match its header".into()));
    }
    w.write_all(RESPONSE_MAGIC)?;
    w.write_all(&(resp.frames as u32).to_le_bytes())?;
    w.write_all(&(resp.dim as u32).to_le_bytes())?;
    write_f32s(w, &resp.features)?;
    w.flush()?;
    Ok(())
}

pub fn read_response<R: Read>(r: &mut R) -> Result<EncodeResponse> {
    expect_magic(r, RESPONSE_MAGIC)?;
    let frames = read_u32(r)? as usize;
    let dim = read_u32(r)? as usize;
    let features = read_f32s(r, frames * dim)?;
    Ok(EncodeResponse { frames, dim, features })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_layout_is_bit_exact() {
        let req = EncodeRequest { frames: 1, height: 1, width: 2, pixels: vec![0.5, 0.0, 1.0, 0.25, 0.75, 0.125] };
        let mut buf = Vec::new();
        write_request(&mut buf, &req).unwrap();
        assert_eq!(&buf[..4], b"DCRQ");
        assert_eq!(&buf[4..16], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&buf[16..20], &0.5f32.to_le_bytes());
        assert_eq!(buf.len(), 16 + 6 * 4);
        let mut cur = std::io::Cursor::new(buf);
        assert_eq!(read_request(&mut cur).unwrap(), Some(req));
        assert_eq!(read_request(&mut cur).unwrap(), None);
    }

    #[test]
    fn response_round_trip() {
        let resp = EncodeResponse { frames: 2, dim: 3, features: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] };
        let mut buf = Vec::new();
        write_response(&mut buf, &resp).unwrap();
        assert_eq!(&buf[..12], b"DCRS\x02\x00\x00\x00\x03\x00\x00\x00");
        assert_eq!(read_response(&mut buf.as_slice()).unwrap(), resp);
        assert!(read_response(&mut &buf[..10]).is_err());
    }
}
