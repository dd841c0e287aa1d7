//! Frame ingest, preprocessing, perturbations, probes and synthetic corpora.

pub mod blur;
pub mod clip;
pub mod frames;
pub mod jpeg;
pub mod manifest;
pub mod perturb;
pub mod preprocess;
pub mod probe;
pub mod synth;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use clip::{ClipTensor, Frame, Stage};
pub use frames::{load_clip, sample_frames, DEFAULT_SEQ_LEN};
pub use jpeg::{jpeg_roundtrip, psnr};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry, Split};
pub use perturb::{default_perturbations, PerturbationSpec};
pub use preprocess::{preprocess_eval, preprocess_train, AugmentConfig};
pub use probe::{replicate_frame, scramble_frames};
pub use synth::{synth_sequences, write_synth_corpus, SynthCorpusConfig};
