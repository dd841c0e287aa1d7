//! Deterministic toy encoder used for protocol and interchangeability tests.
//!
//! Each frame is reduced to a 7×7 grid of per-channel cell means, projected
//! by a fixed seeded Gaussian matrix and L2-normalized. Rows depend only on
//! their own frame.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::rng;

use super::protocol::{read_request, write_response, EncodeResponse};

pub const STUB_GRID: usize = 7;
pub const STUB_ENCODER_ID: &str = "stub";

pub struct StubEncoder {
    dim: usize,
    projection: Vec<f32>,
}

impl StubEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        let k = STUB_GRID * STUB_GRID * 3;
        let mut r = rng::rng(rng::derive(seed, &[0x57ab]));
        let scale = 1.0 / (k as f64).sqrt();
        let projection = (0..k * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                (z * scale) as f32
            })
            .collect();
        StubEncoder { dim, projection }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One feature row for an `h×w×3` interleaved frame.
    pub fn encode_frame(&self, pixels: &[f32], h: usize, w: usize) -> Vec<f32> {
        let g = STUB_GRID;
        let mut cells = vec![0f64; g * g * 3];
        let mut counts = vec![0usize; g * g];
        for y in 0..h {
            let cy = y * g / h;
            for x in 0..w {
                let cx = x * g / w;
                let cell = cy * g + cx;
                counts[cell] += 1;
                for c in 0..3 {
                    cells[cell * 3 + c] += pixels[(y * w + x) * 3 + c] as f64;
                }
            }
        }
        let means: Vec<f32> = cells
            .iter()
            .enumerate()
            .map(|(i, &s)| (s / counts[i / 3].max(1) as f64) as f32)
            .collect();
        let mut row = crate::tensor::matmul(&means, &self.projection, 1, means.len(), self.dim);
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut row {
                *v = (*v as f64 / norm) as f32;
            }
        }
        row
    }

    /// Rows for `frames` consecutive frames.
    pub fn encode(&self, pixels: &[f32], frames: usize, h: usize, w: usize) -> Vec<f32> {
        let per = h * w * 3;
        (0..frames)
            .flat_map(|i| self.encode_frame(&pixels[i * per..(i + 1) * per], h, w))
            .collect()
    }
}

/// Answers protocol requests until the input stream ends.
pub fn serve<R: Read, W: Write>(input: &mut R, output: &mut W, dim: usize, seed: u64) -> Result<()> {
    let enc = StubEncoder::new(dim, seed);
    while let Some(req) = read_request(input)? {
        let features = enc.encode(&req.pixels, req.frames, req.height, req.width);
        write_response(output, &EncodeResponse { frames: req.frames, dim, features })?;
    }
    Ok(())
}
