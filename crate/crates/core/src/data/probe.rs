//! Probe conditions that isolate temporal cues (frame scrambling) from
//! spatial cues (single-frame replication).
//!
//! The same index logic is exposed for frame clips and for feature sequences.
//! Because encoders map each frame independently, probing the features of a
//! clip gives exactly the features of the probed clip.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;
use crate::sequence::FeatureSequence;

use super::clip::ClipTensor;

/// Seeded uniform permutation of `0..l`, redrawn until it is not the identity.
pub fn scramble_permutation(l: usize, seed: u64) -> Result<Vec<usize>> {
    if l < 2 {
        return Err(Error::Probe(format!("scrambling needs at least 2 frames, got {l}")));
    }
    let mut r = rng::rng(seed);
    let mut perm: Vec<usize> = (0..l).collect();
    loop {
        perm.shuffle(&mut r);
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Seeded uniform index in `0..l`.
pub fn replicate_index(l: usize, seed: u64) -> Result<usize> {
    if l == 0 {
        return Err(Error::Probe("cannot replicate a frame of an empty clip".into()));
    }
    Ok(rng::rng(seed).random_range(0..l))
}

pub fn scramble_frames(clip: &ClipTensor, seed: u64) -> Result<ClipTensor> {
    let perm = scramble_permutation(clip.len(), seed)?;
    Ok(ClipTensor {
        frames: perm.iter().map(|&i| clip.frames[i].clone()).collect(),
        ..clip.clone()
    })
}

pub fn replicate_frame(clip: &ClipTensor, seed: u64) -> Result<ClipTensor> {
    let i = replicate_index(clip.len(), seed)?;
    Ok(ClipTensor {
        frames: vec![clip.frames[i].clone(); clip.len()],
        ..clip.clone()
    })
}

pub fn scramble_features(seq: &FeatureSequence, seed: u64) -> Result<FeatureSequence> {
    seq.reorder(&scramble_permutation(seq.len(), seed)?)
}

pub fn replicate_features(seq: &FeatureSequence, seed: u64) -> Result<FeatureSequence> {
    let i = replicate_index(seq.len(), seed)?;
    seq.reorder(&vec![i; seq.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::clip::{Frame, Stage};

    fn clip(l: usize) -> ClipTensor {
        let frames = (0..l).map(|i| Frame::filled(2, 2, i as f32)).collect();
        ClipTensor::new(frames, "v", Stage::Raw).unwrap()
    }

    #[test]
    fn scramble_is_non_identity_permutation() {
        for seed in 0..200 {
            let c = clip(2 + (seed as usize % 7));
            let s = scramble_frames(&c, seed).unwrap();
            let mut a: Vec<f32> = c.frames.iter().map(|f| f.data[0]).collect();
            let mut b: Vec<f32> = s.frames.iter().map(|f| f.data[0]).collect();
            assert_ne!(a, b);
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            assert_eq!(a, b);
        }
        assert_eq!(scramble_permutation(8, 3).unwrap(), scramble_permutation(8, 3).unwrap());
        assert!(matches!(scramble_frames(&clip(1), 0), Err(Error::Probe(_))));
    }

    #[test]
    fn replicate_has_zero_temporal_variance() {
        let c = clip(8);
        assert!(c.temporal_variance() > 0.0);
        let r = replicate_frame(&c, 4).unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.frames.iter().all(|f| f == &r.frames[0]));
        assert_eq!(r.temporal_variance(), 0.0);
        assert!(replicate_index(8, 4).unwrap() < 8);
    }

    #[test]
    fn feature_probe_matches_frame_probe() {
        let c = clip(6);
        let seq = FeatureSequence::from_rows(6, 1, (0..6).map(|i| i as f32).collect(), "v", "e").unwrap();
        let sc = scramble_frames(&c, 11).unwrap();
        let sf = scramble_features(&seq, 11).unwrap();
        for (f, v) in sc.frames.iter().zip(sf.features().data()) {
            assert_eq!(f.data[0], *v);
        }
        let rc = replicate_frame(&c, 5).unwrap();
        let rf = replicate_features(&seq, 5).unwrap();
        assert_eq!(rc.frames[0].data[0], rf.features().data()[0]);
    }
}
