//! Average log-magnitude spectrum of frame luma.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::clip::Frame;
use crate::error::{Error, Result};

/// Running sum of centered `log(1 + |DFT(luma)|)` grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub height: usize,
    pub width: usize,
    pub sum: Vec<f64>,
    pub count: usize,
    pub source: String,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    source: String,
    height: usize,
    width: usize,
    count: usize,
    min: f64,
    max: f64,
}

/// Centered log-magnitude spectrum of one frame's luma.
pub fn frame_spectrum(frame: &Frame) -> Vec<f64> {
    let (h, w) = (frame.height, frame.width);
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = frame.luma().into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = ((y + h / 2) % h, (x + w / 2) % w);
            out[sy * w + sx] = buf[y * w + x].norm().ln_1p();
        }
    }
    out
}

impl SpectrumGrid {
    pub fn new(height: usize, width: usize, source: impl Into<String>) -> Self {
        SpectrumGrid { height, width, sum: vec![0.0; height * width], count: 0, source: source.into() }
    }

    pub fn add_frame(&mut self, frame: &Frame) -> Result<()> {
        if frame.height != self.height || frame.width != self.width {
            return Err(Error::Dimension(format!(
                "frame {}×{} in a {}×{} spectrum",
                frame.height, frame.width, self.height, self.width
            )));
        }
        for (s, v) in self.sum.iter_mut().zip(frame_spectrum(frame)) {
            *s += v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &SpectrumGrid) -> Result<()> {
        if (other.height, other.width) != (self.height, self.width) {
            return Err(Error::Dimension("cannot merge spectra of different sizes".into()));
        }
        for (s, v) in self.sum.iter_mut().zip(&other.sum) {
            *s += v;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::Metric(format!("spectrum '{}' has no frames", self.source)));
        }
        Ok(self.sum.iter().map(|s| s / self.count as f64).collect())
    }

    /// Mean grid min-max scaled to [0, 1] (all zeros if flat), with the range.
    pub fn normalized(&self) -> Result<(Vec<f64>, f64, f64)> {
        let mean = self.mean()?;
        let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let norm = mean.iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect();
        Ok((norm, lo, hi))
    }

    /// 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        let (norm, _, _) = self.normalized()?;
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for v in norm {
            out.extend_from_slice(&((v * 65535.0).round() as u16).to_be_bytes());
        }
        Ok(out)
    }

    /// Writes `<stem>.pgm`, `<stem>.f32` (normalized grid, f32le) and `<stem>.json`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (norm, min, max) = self.normalized()?;
        let values: Vec<f32> = norm.iter().map(|&v| v as f32).collect();
        let mut raw = Vec::new();
        crate::container::f32_to_le(&values, &mut raw);
        let sidecar = Sidecar {
            source: self.source.clone(),
            height: self.height,
            width: self.width,
            count: self.count,
            min,
            max,
        };
        let files = [
            ("pgm", self.to_pgm()?),
            ("f32", raw),
            ("json", serde_json::to_vec_pretty(&sidecar)?),
        ];
        for (ext, bytes) in files {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Average spectrum over a non-empty set of equally sized frames.
pub fn avg_spectrum<'a>(frames: impl IntoIterator<Item = &'a Frame>, source: &str) -> Result<SpectrumGrid> {
    let mut grid: Option<SpectrumGrid> = None;
    for f in frames {
        grid.get_or_insert_with(|| SpectrumGrid::new(f.height, f.width, source)).add_frame(f)?;
    }
    grid.ok_or_else(|| Error::Metric(format!("no frames for spectrum '{source}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_is_dc_only() {
        let f = Frame::filled(16, 16, 0.5);
        let g = avg_spectrum([&f, &f], "c").unwrap();
        let mean = g.mean().unwrap();
        let dc = 8 * 16 + 8;
        assert!((mean[dc] - (0.5f64 * 256.0).ln_1p()).abs() < 1e-9);
        for (i, v) in mean.iter().enumerate() {
            if i != dc {
                assert!(v.abs() < 1e-9, "bin {i} = {v}");
            }
        }
        let (norm, _, _) = g.normalized().unwrap();
        assert_eq!(norm[dc], 1.0);
    }

    #[test]
    fn horizontal_sinusoid_peaks_symmetrically() {
        let k = 3;
        let f = Frame::from_fn(16, 32, |_, x, _| {
            0.5 + 0.4 * (2.0 * std::f32::consts::PI * k as f32 * x as f32 / 32.0).cos()
        });
        let s = frame_spectrum(&f);
        let (cy, cx) = (8, 16);
        let row = &s[cy * 32..(cy + 1) * 32];
        assert!((row[cx + k] - row[cx - k]).abs() < 1e-9);
        let mut others: Vec<(usize, f64)> = s.iter().copied().enumerate().collect();
        others.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let top: Vec<usize> = others[..3].iter().map(|p| p.0).collect();
        for idx in [cy * 32 + cx, cy * 32 + cx + k, cy * 32 + cx - k] {
            assert!(top.contains(&idx));
        }
    }

    #[test]
    fn empty_source_is_metric_error() {
        assert!(matches!(avg_spectrum(std::iter::empty(), "x"), Err(Error::Metric(_))));
    }

    #[test]
    fn pgm_layout() {
        let f = Frame::from_fn(4, 6, |y, x, _| ((x + y) % 3) as f32 / 3.0);
        let g = avg_spectrum([&f], "p").unwrap();
        let pgm = g.to_pgm().unwrap();
        let header = b"P5\n6 4\n65535\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 2 * 24);
    }
}
