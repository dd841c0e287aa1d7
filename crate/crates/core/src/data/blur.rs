use crate::error::{Error, Result};

use super::clip::Frame;

/// Normalized 1-D Gaussian taps for radius `ceil(3σ)`, index `r` is the center.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Reflect-101 border: `dcb|abcd|cba`.
fn reflect101(mut i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian blur of every channel.
pub fn gaussian_blur(frame: &Frame, sigma: f64) -> Result<Frame> {
    let k = gaussian_kernel(sigma)?;
    let r = (k.len() / 2) as i64;
    let (h, w) = (frame.height, frame.width);
    let mut tmp = vec![0.0f64; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, &kv) in k.iter().enumerate() {
                    let xx = reflect101(x as i64 + t as i64 - r, w);
                    acc += kv * frame.at(y, xx, c) as f64;
                }
                tmp[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    let mut out = vec![0.0f32; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (t, &kv) in k.iter().enumerate() {
                    let yy = reflect101(y as i64 + t as i64 - r, h);
                    acc += kv * tmp[(yy * w + x) * 3 + c];
                }
                out[(y * w + x) * 3 + c] = acc as f32;
            }
        }
    }
    Frame::new(h, w, out)
}
