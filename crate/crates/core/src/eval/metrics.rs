//! Video-level metrics: accuracy at a fixed threshold and average precision.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::label::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One scored video.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub label: Label,
    pub video_id: String,
    pub generator: Option<String>,
}

impl Scored {
    pub fn new(score: f64, label: Label, video_id: impl Into<String>) -> Self {
        Scored {
            score,
            label,
            video_id: video_id.into(),
            generator: None,
        }
    }
}

fn check_scores(set: &[Scored]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Metric("empty scored set".into()));
    }
    if let Some(s) = set.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::Metric(format!("non-finite score for '{}'", s.video_id)));
    }
    Ok(())
}

/// Share of videos whose thresholded verdict matches the label. A score equal
/// to the threshold is a "generated" verdict.
pub fn accuracy(set: &[Scored], threshold: f64) -> Result<f64> {
    check_scores(set)?;
    let correct = set
        .iter()
        .filter(|s| (s.score >= threshold) == s.label.is_generated())
        .count();
    Ok(correct as f64 / set.len() as f64)
}

/// Ranking used by AP: score descending, ties by ascending video id.
pub fn ranking_order(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.video_id.cmp(&b.video_id))
}

/// Mean over positives of the precision at each positive's rank.
pub fn average_precision(set: &[Scored]) -> Result<f64> {
    check_scores(set)?;
    let mut ranked: Vec<&Scored> = set.iter().collect();
    ranked.sort_by(|a, b| ranking_order(a, b));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, s) in ranked.iter().enumerate() {
        if s.label.is_generated() {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::Metric("average precision needs at least one positive".into()));
    }
    Ok(sum / hits as f64)
}

/// Video-level score from frame-level scores: arithmetic mean.
pub fn aggregate_frames(frame_scores: &[f64]) -> Result<f64> {
    if frame_scores.is_empty() {
        return Err(Error::Metric("no frame scores to aggregate".into()));
    }
    let mean = frame_scores.iter().sum::<f64>() / frame_scores.len() as f64;
    let lo = frame_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = frame_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding can push the mean one ulp outside the data range.
    Ok(mean.clamp(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(f64, u8)]) -> Vec<Scored> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(s, l))| {
                Scored::new(s, Label::from_index(l as usize).unwrap(), format!("v{i:03}"))
            })
            .collect()
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&set(&[(0.9, 1), (0.1, 0)]), 0.5).unwrap(), 1.0);
        assert_eq!(accuracy(&set(&[(0.5, 1)]), 0.5).unwrap(), 1.0);
        assert_eq!(accuracy(&set(&[(0.5, 0)]), 0.5).unwrap(), 0.0);
        assert_eq!(accuracy(&set(&[(0.9, 0), (0.1, 1)]), 0.5).unwrap(), 0.0);
        assert!(matches!(accuracy(&[], 0.5), Err(Error::Metric(_))));
    }

    #[test]
    fn ap_cases() {
        let ap = average_precision(&set(&[(0.9, 1), (0.8, 0), (0.3, 1)])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&set(&[(0.9, 1), (0.8, 1), (0.1, 0)])).unwrap(), 1.0);
        for k in 1..8 {
            let mut pairs = vec![(0.9, 0u8); k - 1];
            pairs.push((0.1, 1));
            let ap = average_precision(&set(&pairs)).unwrap();
            assert!((ap - 1.0 / k as f64).abs() < 1e-15);
        }
        assert!(average_precision(&set(&[(0.9, 0)])).is_err());
    }

    #[test]
    fn ap_ties_break_by_video_id() {
        let mut s = vec![
            Scored::new(0.5, Label::Real, "a"),
            Scored::new(0.5, Label::Generated, "b"),
        ];
        assert_eq!(average_precision(&s).unwrap(), 0.5);
        s[0].video_id = "c".into();
        assert_eq!(average_precision(&s).unwrap(), 1.0);
    }

    #[test]
    fn aggregate_cases() {
        assert!((aggregate_frames(&[0.2, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(aggregate_frames(&[0.3; 7]).unwrap(), 0.3);
        assert!(aggregate_frames(&[]).is_err());
    }
}
