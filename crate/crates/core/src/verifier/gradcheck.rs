//! Central finite-difference gradients, used as an oracle for the analytic
//! backward pass.

use crate::label::Label;
use crate::tensor::Tensor;
use crate::error::Result;

use super::{forward_tensor, softmax_cross_entropy, Gradients, VerifierParams};

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every coordinate of `x`.
pub fn central_difference<F>(x: &mut [f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(x);
        x[i] = orig - h;
        let minus = f(x);
        x[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

/// Cross-entropy loss of the verifier in eval mode (dropout off).
pub fn verifier_loss(params: &VerifierParams<f64>, features: &Tensor<f64>, label: Label) -> Result<f64> {
    let trace = forward_tensor(features, params, false, 0)?;
    Ok(softmax_cross_entropy(&trace.logits, label)?.0)
}

/// Finite-difference gradient of the verifier loss with respect to every parameter.
pub fn finite_difference_grad(
    params: &VerifierParams<f64>,
    features: &Tensor<f64>,
    label: Label,
    h: f64,
) -> Result<Gradients<f64>> {
    // Validate shapes once so the closure can unwrap.
    verifier_loss(params, features, label)?;
    let mut work = params.clone();
    let mut grads = params.zeros_like();
    let n_tensors = grads.tensors_mut().len();
    for ti in 0..n_tensors {
        let len = work.tensors_mut()[ti].len();
        for j in 0..len {
            let orig = work.tensors_mut()[ti].data()[j];
            work.tensors_mut()[ti].data_mut()[j] = orig + h;
            let plus = verifier_loss(&work, features, label)?;
            work.tensors_mut()[ti].data_mut()[j] = orig - h;
            let minus = verifier_loss(&work, features, label)?;
            work.tensors_mut()[ti].data_mut()[j] = orig;
            grads.tensors_mut()[ti].data_mut()[j] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}
