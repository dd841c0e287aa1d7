//! Synthetic feature corpora with a planted temporal inconsistency.
//!
//! Real sequences drift slowly: `s_t = u + t·v + ε` with `u ~ N(0, I)`,
//! `v ~ N(0, 0.05²·I)` and `ε ~ N(0, 0.01²·I)`. Generated sequences use the
//! same construction, then one uniformly chosen frame receives an extra
//! independent draw `jump_scale·w`, `w ~ N(0, I)`. Every row is L2-normalized.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use rand_distr::{Distribution, StandardNormal};

use crate::label::Label;
use crate::rng;
use crate::sequence::FeatureSequence;
use crate::verifier::Example;
use crate::error::{Error, Result};
use crate::encoder::{write_feature_cache, EncoderBackendConfig};

use super::manifest::{load_manifest, DatasetManifest, ManifestEntry, Split};

pub const SYNTH_ENCODER_ID: &str = "synthetic";
const DRIFT_STD: f64 = 0.05;
const NOISE_STD: f64 = 0.01;

fn normal_vec(r: &mut rng::Rng, d: usize, std: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            z * std
        })
        .collect()
}

fn one_sequence(l: usize, d: usize, jump_scale: f64, label: Label, seed: u64) -> Vec<f32> {
    let mut r = rng::rng(seed);
    let u = normal_vec(&mut r, d, 1.0);
    let v = normal_vec(&mut r, d, DRIFT_STD);
    // Both classes consume the same draws so jump_scale = 0 makes them identical in law.
    let jump_at = r.random_range(0..l);
    let w = normal_vec(&mut r, d, 1.0);
    let mut out = Vec::with_capacity(l * d);
    for t in 0..l {
        let eps = normal_vec(&mut r, d, NOISE_STD);
        let mut row: Vec<f64> = (0..d).map(|k| u[k] + t as f64 * v[k] + eps[k]).collect();
        if label == Label::Generated && t == jump_at {
            for (x, wk) in row.iter_mut().zip(&w) {
                *x += jump_scale * wk;
            }
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        out.extend(row.iter().map(|x| (x / norm) as f32));
    }
    out
}

pub fn synth_video_id(label: Label, i: usize) -> String {
    match label {
        Label::Real => format!("synth-real-{i:06}"),
        Label::Generated => format!("synth-gen-{i:06}"),
    }
}

/// `n_per_class` real and `n_per_class` generated sequences, interleaved
/// (real 0, generated 0, real 1, …).
pub fn synth_sequences(
    n_per_class: usize,
    l: usize,
    d: usize,
    jump_scale: f64,
    seed: u64,
) -> Result<Vec<Example>> {
    if n_per_class == 0 || l == 0 || d == 0 {
        return Err(Error::Config("synthetic corpus needs n, L, D ≥ 1".into()));
    }
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for label in [Label::Real, Label::Generated] {
            let s = rng::derive(seed, &[label.index() as u64, i as u64]);
            let data = one_sequence(l, d, jump_scale, label, s);
            let seq = FeatureSequence::from_rows(l, d, data, synth_video_id(label, i), SYNTH_ENCODER_ID)?;
            out.push(Example::new(seq, label));
        }
    }
    Ok(out)
}

/// Cosine similarity of consecutive rows (rows are unit length).
pub fn consecutive_similarities(seq: &FeatureSequence) -> Vec<f64> {
    (1..seq.len())
        .map(|t| {
            seq.row(t - 1)
                .iter()
                .zip(seq.row(t))
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum()
        })
        .collect()
}

/// Layout of an on-disk synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seq_len: usize,
    pub dim: usize,
    pub jump_scale: f64,
    pub seed: u64,
    pub generator: String,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        SynthCorpusConfig {
            n_train: 2000,
            n_val: 250,
            n_test: 500,
            seq_len: 8,
            dim: 64,
            jump_scale: 8.0,
            seed: 0,
            generator: "synthetic-gen".into(),
        }
    }
}

pub const SYNTH_FEATURE_DIR: &str = "features";
pub const SYNTH_MANIFEST: &str = "manifest.json";
pub const SYNTH_BACKEND: &str = "backend.json";

/// Writes feature caches, a feature-only manifest and a cache backend config
/// under `dir`. Each real/generated pair shares a prompt id.
pub fn write_synth_corpus(dir: &Path, cfg: &SynthCorpusConfig) -> Result<DatasetManifest> {
    let features = dir.join(SYNTH_FEATURE_DIR);
    let mut entries = Vec::new();
    for (k, (split, n)) in [(Split::Train, cfg.n_train), (Split::Val, cfg.n_val), (Split::Test, cfg.n_test)]
        .into_iter()
        .enumerate()
    {
        if n == 0 {
            continue;
        }
        let set = synth_sequences(n, cfg.seq_len, cfg.dim, cfg.jump_scale, rng::derive(cfg.seed, &[k as u64]))?;
        for (j, mut ex) in set.into_iter().enumerate() {
            ex.seq.video_id = format!("{}-{}", split.as_str(), ex.seq.video_id);
            write_feature_cache(&ex.seq, &features)?;
            entries.push(ManifestEntry {
                video_id: ex.seq.video_id.clone(),
                frames_dir: PathBuf::new(),
                label: ex.label,
                generator: ex.label.is_generated().then(|| cfg.generator.clone()),
                prompt_id: format!("{}-p{:06}", split.as_str(), j / 2),
                split,
                source: None,
            });
        }
    }
    let mut manifest = DatasetManifest::new(vec![cfg.generator.clone()], entries);
    manifest.feature_only = true;
    let path = dir.join(SYNTH_MANIFEST);
    std::fs::write(&path, manifest.to_json()?).map_err(|e| Error::io(&path, e))?;
    let backend = EncoderBackendConfig::cache(SYNTH_FEATURE_DIR, SYNTH_ENCODER_ID);
    let bpath = dir.join(SYNTH_BACKEND);
    std::fs::write(&bpath, serde_json::to_vec_pretty(&backend)?).map_err(|e| Error::io(&bpath, e))?;
    load_manifest(&path)
}
