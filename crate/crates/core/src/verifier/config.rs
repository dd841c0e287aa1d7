use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture of the temporal verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    pub seq_len: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub dropout: f64,
    /// Hidden width of the classification head; 0 means a single linear layer.
    pub head_hidden: usize,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            seq_len: 8,
            width: 768,
            layers: 2,
            heads: 4,
            mlp_hidden: 768,
            dropout: 0.1,
            head_hidden: 0,
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl VerifierConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.seq_len == 0 {
            problems.push("seq_len must be ≥ 1".to_string());
        }
        if self.width == 0 {
            problems.push("width must be ≥ 1".to_string());
        }
        if self.layers == 0 {
            problems.push("layers must be ≥ 1".to_string());
        }
        if self.heads == 0 || !self.width.is_multiple_of(self.heads) {
            problems.push(format!(
                "width {} must be divisible by heads {}",
                self.width, self.heads
            ));
        }
        if self.mlp_hidden == 0 {
            problems.push("mlp_hidden must be ≥ 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn tokens(&self) -> usize {
        self.seq_len + 1
    }
}

/// Optimizer and schedule settings for `train_verifier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub label_smoothing: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 10,
            seed: 0,
            label_smoothing: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label_smoothing {} outside [0, 1)",
                self.label_smoothing
            )));
        }
        Ok(())
    }
}
