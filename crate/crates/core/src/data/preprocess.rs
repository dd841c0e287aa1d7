//! Geometric preprocessing and training-time augmentation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng;

use super::blur::gaussian_blur;
use super::clip::{ClipTensor, Frame, Stage};
use super::jpeg::jpeg_roundtrip;

pub const ENCODER_SIZE: usize = 224;
pub const TRAIN_RESIZE: usize = 256;

/// Largest centered square; offsets are floored.
pub fn center_crop(frame: &Frame) -> Frame {
    let side = frame.height.min(frame.width);
    crop(frame, (frame.height - side) / 2, (frame.width - side) / 2, side, side)
}

pub fn crop(frame: &Frame, top: usize, left: usize, height: usize, width: usize) -> Frame {
    let mut data = Vec::with_capacity(height * width * 3);
    for y in top..top + height {
        let start = (y * frame.width + left) * 3;
        data.extend_from_slice(&frame.data[start..start + width * 3]);
    }
    Frame { height, width, data }
}

/// Bilinear resize with half-pixel centers and edge clamping. Same-size
/// resizes are exact copies.
pub fn resize_bilinear(frame: &Frame, out_h: usize, out_w: usize) -> Frame {
    if out_h == frame.height && out_w == frame.width {
        return frame.clone();
    }
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, (src - i0 as f64) as f32)
            })
            .collect()
    };
    let ys = axis(out_h, frame.height);
    let xs = axis(out_w, frame.width);
    let lerp = |a: f32, b: f32, t: f32| if a == b { a } else { a + (b - a) * t };
    let mut data = Vec::with_capacity(out_h * out_w * 3);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..3 {
                let top = lerp(frame.at(y0, x0, c), frame.at(y0, x1, c), tx);
                let bot = lerp(frame.at(y1, x0, c), frame.at(y1, x1, c), tx);
                data.push(lerp(top, bot, ty));
            }
        }
    }
    Frame { height: out_h, width: out_w, data }
}

fn normalize(frame: &Frame) -> Frame {
    Frame {
        height: frame.height,
        width: frame.width,
        data: frame.data.iter().map(|&v| v.clamp(0.0, 255.0) / 255.0).collect(),
    }
}

/// Evaluation preprocessing: center crop on the short side, bilinear resize to
/// 224×224, scale to [0, 1].
pub fn preprocess_eval(clip: &ClipTensor) -> Result<ClipTensor> {
    clip.map_frames(Stage::Normalized, |f| {
        Ok(normalize(&resize_bilinear(&center_crop(f), ENCODER_SIZE, ENCODER_SIZE)))
    })
}

/// Probabilities and ranges of the training augmentations. Coin flips are
/// drawn once per clip so every frame receives the same treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    pub blur_prob: f64,
    pub blur_sigmas: Vec<f64>,
    pub jpeg_prob: f64,
    pub jpeg_quality_min: u8,
    pub jpeg_quality_max: u8,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip_prob: 0.5,
            blur_prob: 0.1,
            blur_sigmas: vec![1.0, 2.0, 3.0],
            jpeg_prob: 0.1,
            jpeg_quality_min: 50,
            jpeg_quality_max: 95,
        }
    }
}

/// What `preprocess_train` did to a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentRecord {
    pub crop_top: usize,
    pub crop_left: usize,
    pub flipped: bool,
    pub blur_sigma: Option<f64>,
    pub jpeg_quality: Option<u8>,
}

pub fn preprocess_train(clip: &ClipTensor, seed: u64) -> Result<ClipTensor> {
    Ok(preprocess_train_with(clip, seed, &AugmentConfig::default())?.0)
}

/// Training preprocessing: resize to 256×256, random 224 crop shared by all
/// frames, then per-clip flip / blur / JPEG coin flips.
pub fn preprocess_train_with(
    clip: &ClipTensor,
    seed: u64,
    cfg: &AugmentConfig,
) -> Result<(ClipTensor, AugmentRecord)> {
    let mut r = rng::rng(seed);
    let span = TRAIN_RESIZE - ENCODER_SIZE;
    let crop_top = r.random_range(0..=span);
    let crop_left = r.random_range(0..=span);
    let flipped = r.random_bool(cfg.flip_prob);
    let blur_sigma = if r.random_bool(cfg.blur_prob) && !cfg.blur_sigmas.is_empty() {
        Some(cfg.blur_sigmas[r.random_range(0..cfg.blur_sigmas.len())])
    } else {
        None
    };
    let jpeg_quality = if r.random_bool(cfg.jpeg_prob) {
        Some(r.random_range(cfg.jpeg_quality_min..=cfg.jpeg_quality_max))
    } else {
        None
    };
    let record = AugmentRecord { crop_top, crop_left, flipped, blur_sigma, jpeg_quality };

    let out = clip.map_frames(Stage::Normalized, |f| {
        let resized = resize_bilinear(f, TRAIN_RESIZE, TRAIN_RESIZE);
        let mut g = crop(&resized, crop_top, crop_left, ENCODER_SIZE, ENCODER_SIZE);
        if flipped {
            g = g.flip_horizontal();
        }
        if let Some(s) = blur_sigma {
            g = gaussian_blur(&g, s)?;
        }
        if let Some(q) = jpeg_quality {
            g = jpeg_roundtrip(&g, q)?;
        }
        Ok(normalize(&g))
    })?;
    Ok((out, record))
}
