//! Baseline JPEG round trip (8×8 float DCT, Annex K tables, 4:2:0 chroma).
//!
//! Only the lossy stages are simulated: color conversion, subsampling,
//! quantization and reconstruction. Huffman coding is lossless and is skipped,
//! so the decoded pixels equal those of a real encode/decode with the same
//! transforms, and are identical on every platform.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

use super::clip::Frame;

const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69,
    56, 14, 17, 22, 29, 51, 87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104,
    113, 92, 49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99,
];

const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
];

/// Annex K table scaled for `quality` (IJG convention), entries in [1, 255].
pub fn quant_table(quality: u8, chroma: bool) -> Result<[u16; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Parameter(format!("JPEG quality must be in 1..=100, got {quality}")));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let base = if chroma { &CHROMA_TABLE } else { &LUMA_TABLE };
    let mut out = [0u16; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((b as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(out)
}

fn cos_table() -> &'static [[f64; 8]; 8] {
    static TABLE: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; 8]; 8];
        for (u, row) in t.iter_mut().enumerate() {
            let cu = if u == 0 { (0.125f64).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = cu * (((2 * x + 1) as f64 * u as f64 * PI) / 16.0).cos();
            }
        }
        t
    })
}

/// Orthonormal 2-D DCT-II of an 8×8 block.
fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let c = cos_table();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| c[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| c[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let c = cos_table();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| c[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| c[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Quantizes and reconstructs one plane whose sides are multiples of 8.
fn code_plane(plane: &mut [f64], width: usize, height: usize, table: &[u16; 64]) {
    for by in (0..height).step_by(8) {
        for bx in (0..width).step_by(8) {
            let mut block = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = plane[(by + y) * width + bx + x] - 128.0;
                }
            }
            let mut coef = fdct(&block);
            for (c, &q) in coef.iter_mut().zip(table) {
                let q = q as f64;
                *c = (*c / q).round() * q;
            }
            let rec = idct(&coef);
            for y in 0..8 {
                for x in 0..8 {
                    plane[(by + y) * width + bx + x] = (rec[y * 8 + x] + 128.0).round().clamp(0.0, 255.0);
                }
            }
        }
    }
}

fn clamp_u8(v: f64) -> f32 {
    v.round().clamp(0.0, 255.0) as f32
}

/// Encodes and decodes a raw (0..=255) frame at `quality`.
pub fn jpeg_roundtrip(frame: &Frame, quality: u8) -> Result<Frame> {
    let luma_q = quant_table(quality, false)?;
    let chroma_q = quant_table(quality, true)?;
    let (h, w) = (frame.height, frame.width);
    let src = frame.to_u8();
    // Pad to whole 16×16 MCUs by edge replication.
    let ph = h.div_ceil(16) * 16;
    let pw = w.div_ceil(16) * 16;
    let mut yp = vec![0.0; ph * pw];
    let mut cb = vec![0.0; ph * pw];
    let mut cr = vec![0.0; ph * pw];
    for y in 0..ph {
        for x in 0..pw {
            let i = (y.min(h - 1) * w + x.min(w - 1)) * 3;
            let (r, g, b) = (src[i] as f64, src[i + 1] as f64, src[i + 2] as f64);
            let o = y * pw + x;
            yp[o] = (0.299 * r + 0.587 * g + 0.114 * b).round().clamp(0.0, 255.0);
            cb[o] = (-0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b + 128.0).round().clamp(0.0, 255.0);
            cr[o] = (0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b + 128.0).round().clamp(0.0, 255.0);
        }
    }
    let (ch, cw) = (ph / 2, pw / 2);
    let subsample = |plane: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; ch * cw];
        for y in 0..ch {
            for x in 0..cw {
                let s = plane[2 * y * pw + 2 * x]
                    + plane[2 * y * pw + 2 * x + 1]
                    + plane[(2 * y + 1) * pw + 2 * x]
                    + plane[(2 * y + 1) * pw + 2 * x + 1];
                out[y * cw + x] = (s / 4.0).round();
            }
        }
        out
    };
    let mut cb_s = subsample(&cb);
    let mut cr_s = subsample(&cr);
    code_plane(&mut yp, pw, ph, &luma_q);
    code_plane(&mut cb_s, cw, ch, &chroma_q);
    code_plane(&mut cr_s, cw, ch, &chroma_q);

    let mut out = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let yy = yp[y * pw + x];
            let b = cb_s[(y / 2) * cw + x / 2] - 128.0;
            let r = cr_s[(y / 2) * cw + x / 2] - 128.0;
            out.push(clamp_u8(yy + 1.402 * r));
            out.push(clamp_u8(yy - 0.344_136_286 * b - 0.714_136_286 * r));
            out.push(clamp_u8(yy + 1.772 * b));
        }
    }
    Frame::new(h, w, out)
}

/// Peak signal-to-noise ratio in dB for 8-bit data (∞ when identical).
pub fn psnr(a: &Frame, b: &Frame) -> f64 {
    let (x, y) = (a.to_u8(), b.to_u8());
    let mse = x
        .iter()
        .zip(&y)
        .map(|(&p, &q)| (p as f64 - q as f64).powi(2))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_scaling() {
        assert_eq!(quant_table(50, false).unwrap(), LUMA_TABLE);
        assert!(quant_table(100, false).unwrap().iter().all(|&q| q == 1));
        // q = 10 → scale 500: 16·5 = 80
        assert_eq!(quant_table(10, false).unwrap()[0], 80);
        assert_eq!(quant_table(1, true).unwrap()[63], 255);
        assert!(matches!(quant_table(0, false), Err(Error::Parameter(_))));
        assert!(quant_table(101, false).is_err());
    }

    #[test]
    fn dct_round_trip() {
        let mut block = [0.0; 64];
        for (i, v) in block.iter_mut().enumerate() {
            *v = ((i * 37) % 255) as f64 - 128.0;
        }
        let back = idct(&fdct(&block));
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mid_gray_survives() {
        let f = Frame::filled(20, 30, 128.0);
        for q in [10, 50, 90] {
            let out = jpeg_roundtrip(&f, q).unwrap();
            assert!(out.data.iter().all(|&v| (v - 128.0).abs() <= 1.0));
        }
    }

    #[test]
    fn odd_sizes_keep_dimensions() {
        let f = Frame::from_fn(13, 7, |y, x, c| ((y * 17 + x * 5 + c * 40) % 256) as f32);
        let out = jpeg_roundtrip(&f, 75).unwrap();
        assert_eq!((out.height, out.width), (13, 7));
    }
}
