//! Feature sequences for manifest entries under an evaluation condition.

use serde::{Deserialize, Serialize};

use crate::data::frames::load_clip;
use crate::data::manifest::{DatasetManifest, ManifestEntry};
use crate::data::perturb::PerturbationSpec;
use crate::data::preprocess::{preprocess_eval, preprocess_train};
use crate::data::probe::{replicate_features, replicate_frame, scramble_features, scramble_frames};
use crate::data::{ClipTensor, DEFAULT_SEQ_LEN};
use crate::encoder::Backend;
use crate::error::{Error, Result};
use crate::rng;
use crate::sequence::FeatureSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Frames scrambled: only temporal structure changes.
    Temporal,
    /// One frame replicated: only spatial content remains.
    Spatial,
}

impl ProbeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::Temporal => "temporal",
            ProbeKind::Spatial => "spatial",
        }
    }
}

/// What is done to a video between frame sampling and scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Condition {
    pub perturbation: Option<PerturbationSpec>,
    pub probe: Option<ProbeKind>,
}

impl Condition {
    pub fn perturbed(spec: PerturbationSpec) -> Self {
        Condition { perturbation: Some(spec), probe: None }
    }

    pub fn probed(kind: ProbeKind) -> Self {
        Condition { perturbation: None, probe: Some(kind) }
    }

    pub fn tag(&self) -> String {
        match (self.perturbation, self.probe) {
            (None, None) => "baseline".into(),
            (Some(p), None) => p.tag(),
            (None, Some(k)) => k.as_str().into(),
            (Some(p), Some(k)) => format!("{}+{}", p.tag(), k.as_str()),
        }
    }
}

fn raw_clip(manifest: &DatasetManifest, entry: &ManifestEntry, seq_len: usize) -> Result<ClipTensor> {
    if manifest.feature_only {
        return Err(Error::Capability("manifest is feature-only; this operation needs frame folders".into()));
    }
    load_clip(&manifest.frames_dir(entry), &entry.video_id, seq_len)
}

/// Sampled frames of `entry` after evaluation preprocessing.
pub fn preprocessed_clip(manifest: &DatasetManifest, entry: &ManifestEntry, seq_len: usize) -> Result<ClipTensor> {
    let clip = raw_clip(manifest, entry, seq_len).and_then(|c| preprocess_eval(&c));
    clip.map_err(|e| e.context(format!("video '{}'", entry.video_id)))
}

/// Manifest plus backend: resolves entries to feature sequences.
pub struct FeatureSource<'a> {
    pub manifest: &'a DatasetManifest,
    pub backend: &'a Backend,
    pub seq_len: usize,
    /// Base seed for probe permutations and training crops.
    pub seed: u64,
}

impl<'a> FeatureSource<'a> {
    pub fn new(manifest: &'a DatasetManifest, backend: &'a Backend) -> Self {
        FeatureSource { manifest, backend, seq_len: DEFAULT_SEQ_LEN, seed: 0 }
    }

    fn probe_seed(&self, kind: ProbeKind, video_id: &str) -> u64 {
        rng::derive_str(rng::derive(self.seed, &[0x9b0e, kind as u64]), video_id)
    }

    fn raw_clip(&self, entry: &ManifestEntry) -> Result<ClipTensor> {
        raw_clip(self.manifest, entry, self.seq_len)
    }

    fn probe_clip(&self, clip: ClipTensor, probe: Option<ProbeKind>) -> Result<ClipTensor> {
        match probe {
            None => Ok(clip),
            Some(ProbeKind::Temporal) => scramble_frames(&clip, self.probe_seed(ProbeKind::Temporal, &clip.video_id)),
            Some(ProbeKind::Spatial) => replicate_frame(&clip, self.probe_seed(ProbeKind::Spatial, &clip.video_id)),
        }
    }

    /// Features of `entry` under `cond`. Cache backends apply probes on the
    /// feature rows (exact, since encoders are per-frame pure) and cannot
    /// apply pixel perturbations.
    pub fn sequence(&self, entry: &ManifestEntry, cond: &Condition) -> Result<FeatureSequence> {
        let ctx = |e: Error| e.context(format!("video '{}' [{}]", entry.video_id, cond.tag()));
        if !self.backend.encodes_pixels() {
            if cond.perturbation.is_some() {
                return Err(ctx(Error::Capability(
                    "perturbations need an encoding backend (external or native), not a feature cache".into(),
                )));
            }
            let seq = self.backend.load_cached(&entry.video_id).map_err(ctx)?;
            return match cond.probe {
                None => Ok(seq),
                Some(ProbeKind::Temporal) => {
                    scramble_features(&seq, self.probe_seed(ProbeKind::Temporal, &entry.video_id))
                }
                Some(ProbeKind::Spatial) => {
                    replicate_features(&seq, self.probe_seed(ProbeKind::Spatial, &entry.video_id))
                }
            }
            .map_err(ctx);
        }
        let run = || {
            let mut clip = self.raw_clip(entry)?;
            if let Some(spec) = &cond.perturbation {
                clip = spec.apply_clip(&clip)?;
            }
            let clip = self.probe_clip(preprocess_eval(&clip)?, cond.probe)?;
            self.backend.encode_clip(&clip)
        };
        run().map_err(ctx)
    }

    /// Features of one augmented training view (cache backends return the
    /// cached sequence).
    pub fn train_sequence(&self, entry: &ManifestEntry) -> Result<FeatureSequence> {
        let ctx = |e: Error| e.context(format!("video '{}' [train]", entry.video_id));
        if !self.backend.encodes_pixels() {
            return self.backend.load_cached(&entry.video_id).map_err(ctx);
        }
        let run = || {
            let clip = self.raw_clip(entry)?;
            let seed = rng::derive_str(rng::derive(self.seed, &[0xa09]), &entry.video_id);
            self.backend.encode_clip(&preprocess_train(&clip, seed)?)
        };
        run().map_err(ctx)
    }
}
