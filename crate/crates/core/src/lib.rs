//! Generated-video detection from sequences of per-frame encoder features.
//!
//! Frames are mapped through a frozen image encoder into a feature sequence;
//! a small transformer verifier then decides whether the sequence comes from
//! a camera-captured (`Label::Real`) or a generated (`Label::Generated`)
//! video. The crate also carries the data pipeline, the encoder backends and
//! the evaluation drivers (cross-generator, robustness, probes, spectra).

pub mod container;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod label;
pub mod nn;
pub mod rng;
pub mod sequence;
pub mod tensor;
pub mod verifier;

pub use error::{Error, ErrorClass, Result};
pub use label::Label;
pub use sequence::FeatureSequence;
pub use tensor::Tensor;
