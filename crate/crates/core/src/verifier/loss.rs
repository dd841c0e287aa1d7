use crate::error::{Error, Result};
use crate::label::Label;
use crate::tensor::{Scalar, Tensor};

/// Cross-entropy of a two-way softmax against a hard label.
///
/// Returns the loss and its gradient with respect to the logits,
/// `softmax(logits) − onehot(label)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, label: Label) -> Result<(T, Tensor<T>)> {
    smoothed_cross_entropy(logits, label, 0.0)
}

/// Cross-entropy against `(1−ε)·onehot + ε/2`.
pub fn smoothed_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    label: Label,
    smoothing: f64,
) -> Result<(T, Tensor<T>)> {
    let z = logits.data();
    if z.len() != 2 {
        return Err(Error::Dimension(format!("expected 2 logits, got {}", z.len())));
    }
    if !logits.is_finite() {
        return Err(Error::Data("non-finite logits".into()));
    }
    let max = z[0].max(z[1]);
    let sum = (z[0] - max).exp() + (z[1] - max).exp();
    let lse = max + sum.ln();
    let probs = [(z[0] - lse).exp(), (z[1] - lse).exp()];
    let eps = T::of(smoothing);
    let half = T::of(0.5);
    let target = |c: usize| {
        let hot = if c == label.index() { T::one() } else { T::zero() };
        (T::one() - eps) * hot + eps * half
    };
    let loss = (0..2).fold(T::zero(), |acc, c| acc + target(c) * (lse - z[c]));
    let grad = Tensor::from_vec(&[2], vec![probs[0] - target(0), probs[1] - target(1)])?;
    Ok((loss, grad))
}
