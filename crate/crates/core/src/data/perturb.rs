use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::blur::gaussian_blur;
use super::clip::{ClipTensor, Frame, Stage};
use super::jpeg::jpeg_roundtrip;

/// A test-time degradation applied to raw frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    GaussianBlur { sigma: f64 },
    Jpeg { quality: u8 },
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationSpec::GaussianBlur { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Parameter(format!("blur sigma must be > 0, got {sigma}")))
            }
            PerturbationSpec::Jpeg { quality } if !(1..=100).contains(&quality) => {
                Err(Error::Parameter(format!("JPEG quality must be in 1..=100, got {quality}")))
            }
            _ => Ok(()),
        }
    }

    /// Short tag used in file names and report headers.
    pub fn tag(&self) -> String {
        match self {
            PerturbationSpec::GaussianBlur { sigma } => format!("blur_sigma{sigma}"),
            PerturbationSpec::Jpeg { quality } => format!("jpeg_q{quality}"),
        }
    }

    /// Applies to one raw frame; the result is re-quantized to 8 bits.
    pub fn apply(&self, frame: &Frame) -> Result<Frame> {
        self.validate()?;
        match *self {
            PerturbationSpec::GaussianBlur { sigma } => Ok(gaussian_blur(frame, sigma)?.quantized()),
            PerturbationSpec::Jpeg { quality } => jpeg_roundtrip(frame, quality),
        }
    }

    pub fn apply_clip(&self, clip: &ClipTensor) -> Result<ClipTensor> {
        clip.map_frames(Stage::Raw, |f| self.apply(f))
    }
}

/// Blur σ ∈ {1, 2, 3} followed by JPEG quality 90, 80, 70, 60, 50.
pub fn default_perturbations() -> Vec<PerturbationSpec> {
    let mut specs: Vec<PerturbationSpec> = [1.0, 2.0, 3.0]
        .into_iter()
        .map(|sigma| PerturbationSpec::GaussianBlur { sigma })
        .collect();
    specs.extend([90, 80, 70, 60, 50].map(|quality| PerturbationSpec::Jpeg { quality }));
    specs
}
