use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-frame encoder outputs for one video, `L×D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    features: Tensor<f32>,
    pub video_id: String,
    pub encoder_id: String,
}

impl FeatureSequence {
    pub fn new(
        features: Tensor<f32>,
        video_id: impl Into<String>,
        encoder_id: impl Into<String>,
    ) -> Result<Self> {
        if features.shape().len() != 2 || features.shape()[0] == 0 || features.shape()[1] == 0 {
            return Err(Error::Dimension(format!(
                "feature sequence must be L×D with L, D ≥ 1, got shape {:?}",
                features.shape()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("feature sequence contains NaN/Inf".into()));
        }
        let encoder_id = encoder_id.into();
        if encoder_id.is_empty() {
            return Err(Error::Contract("encoder_id must be non-empty".into()));
        }
        Ok(FeatureSequence {
            features,
            video_id: video_id.into(),
            encoder_id,
        })
    }

    pub fn from_rows(
        rows: usize,
        dim: usize,
        data: Vec<f32>,
        video_id: impl Into<String>,
        encoder_id: impl Into<String>,
    ) -> Result<Self> {
        Self::new(Tensor::from_vec(&[rows, dim], data)?, video_id, encoder_id)
    }

    pub fn len(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn features(&self) -> &Tensor<f32> {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    /// Same sequence with its rows reordered by `order` (row `i` of the result
    /// is row `order[i]` of `self`).
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut data = Vec::with_capacity(order.len() * d);
        for &i in order {
            if i >= self.len() {
                return Err(Error::Dimension(format!("row index {i} out of range {}", self.len())));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_rows(order.len(), d, data, self.video_id.clone(), self.encoder_id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_empty() {
        assert!(FeatureSequence::from_rows(1, 2, vec![0.0, f32::NAN], "v", "e").is_err());
        assert!(FeatureSequence::from_rows(0, 2, vec![], "v", "e").is_err());
        assert!(FeatureSequence::from_rows(1, 1, vec![0.0], "v", "").is_err());
    }

    #[test]
    fn reorder_moves_rows() {
        let s = FeatureSequence::from_rows(3, 1, vec![0.0, 1.0, 2.0], "v", "e").unwrap();
        let r = s.reorder(&[2, 0, 1]).unwrap();
        assert_eq!(r.features().data(), &[2.0, 0.0, 1.0]);
    }
}
