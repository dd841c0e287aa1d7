use crate::error::{Error, Result};

/// One RGB frame, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!("degenerate frame {height}×{width}")));
        }
        if data.len() != height * width * 3 {
            return Err(Error::Dimension(format!(
                "frame {height}×{width}×3 needs {} values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        Ok(Frame { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Frame { height, width, data: vec![value; height * width * 3] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Frame { height, width, data }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        Frame {
            height: img.height() as usize,
            width: img.width() as usize,
            data: img.as_raw().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Rounds and clamps to 8-bit samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn quantized(&self) -> Frame {
        Frame {
            height: self.height,
            width: self.width,
            data: self.to_u8().into_iter().map(f32::from).collect(),
        }
    }

    pub fn scaled(&self, factor: f32) -> Frame {
        Frame {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    /// Mirror left↔right.
    pub fn flip_horizontal(&self) -> Frame {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..3 {
                    out.data[(y * self.width + x) * 3 + c] = self.at(y, self.width - 1 - x, c);
                }
            }
        }
        out
    }

    /// ITU-R BT.601 luma plane.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }
}

/// Value range of a clip's samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Integer samples in 0..=255, as decoded.
    Raw,
    /// Floats in [0, 1], ready for an encoder.
    Normalized,
}

/// A video clip: `L` frames of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTensor {
    pub frames: Vec<Frame>,
    pub video_id: String,
    pub source_fps: Option<f64>,
    pub stage: Stage,
}

impl ClipTensor {
    pub fn new(frames: Vec<Frame>, video_id: impl Into<String>, stage: Stage) -> Result<Self> {
        let clip = ClipTensor { frames, video_id: video_id.into(), source_fps: None, stage };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .frames
            .first()
            .ok_or_else(|| Error::Data(format!("clip '{}' has no frames", self.video_id)))?;
        for (i, f) in self.frames.iter().enumerate() {
            if f.height != first.height || f.width != first.width {
                return Err(Error::Dimension(format!(
                    "clip '{}' frame {i} is {}×{}, frame 0 is {}×{}",
                    self.video_id, f.height, f.width, first.height, first.width
                )));
            }
            let ok = match self.stage {
                Stage::Raw => f.data.iter().all(|&v| (0.0..=255.0).contains(&v) && v.fract() == 0.0),
                Stage::Normalized => f.data.iter().all(|&v| (0.0..=1.0).contains(&v)),
            };
            if !ok {
                return Err(Error::Data(format!(
                    "clip '{}' frame {i} has samples outside the {:?} range",
                    self.video_id, self.stage
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    /// Applies `f` frame by frame, keeping id and fps.
    pub fn map_frames<F>(&self, stage: Stage, f: F) -> Result<ClipTensor>
    where
        F: FnMut(&Frame) -> Result<Frame>,
    {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(ClipTensor {
            frames,
            video_id: self.video_id.clone(),
            source_fps: self.source_fps,
            stage,
        })
    }

    /// Mean over pixels of the per-pixel variance across frames.
    pub fn temporal_variance(&self) -> f64 {
        let l = self.frames.len() as f64;
        let n = self.frames[0].data.len();
        let mut total = 0.0;
        for i in 0..n {
            let mean = self.frames.iter().map(|f| f.data[i] as f64).sum::<f64>() / l;
            total += self.frames.iter().map(|f| (f.data[i] as f64 - mean).powi(2)).sum::<f64>() / l;
        }
        total / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_is_involution() {
        let f = Frame::from_fn(3, 5, |y, x, c| (y * 100 + x * 10 + c) as f32);
        assert_ne!(f.flip_horizontal(), f);
        assert_eq!(f.flip_horizontal().flip_horizontal(), f);
    }

    #[test]
    fn stage_ranges_are_checked() {
        let raw = Frame::filled(2, 2, 0.5);
        assert!(ClipTensor::new(vec![raw.clone()], "v", Stage::Raw).is_err());
        assert!(ClipTensor::new(vec![raw], "v", Stage::Normalized).is_ok());
        assert!(ClipTensor::new(vec![], "v", Stage::Raw).is_err());
        let mixed = vec![Frame::filled(2, 2, 1.0), Frame::filled(2, 3, 1.0)];
        assert!(matches!(ClipTensor::new(mixed, "v", Stage::Raw), Err(Error::Dimension(_))));
    }
}
