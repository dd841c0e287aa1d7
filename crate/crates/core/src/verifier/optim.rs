use crate::error::{Error, Result};
use crate::tensor::Scalar;

use super::{Gradients, VerifierParams};

/// Classic momentum SGD, no dampening or weight decay:
/// `v ← μ·v + g`, `θ ← θ − lr·v`.
pub fn sgd_momentum_step<T: Scalar>(
    params: &mut VerifierParams<T>,
    grads: &Gradients<T>,
    velocity: &mut VerifierParams<T>,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    params.check_congruent(grads)?;
    params.check_congruent(velocity)?;
    let lr = T::of(lr);
    let mu = T::of(momentum);
    for ((p, (_, g)), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.named())
        .zip(velocity.tensors_mut())
    {
        for ((pi, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = mu * *vi + gi;
            *pi = *pi - lr * *vi;
        }
    }
    if !params.is_finite() {
        return Err(Error::Data("parameters became non-finite after SGD step".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::{init_params, VerifierConfig};

    fn cfg() -> VerifierConfig {
        VerifierConfig { seq_len: 2, width: 4, heads: 2, mlp_hidden: 4, layers: 1, ..Default::default() }
    }

    fn filled(c: &VerifierConfig, v: f64) -> VerifierParams<f64> {
        let mut p = VerifierParams::<f64>::zeros(c).unwrap();
        for t in p.tensors_mut() {
            t.fill(v);
        }
        p
    }

    #[test]
    fn zero_momentum_is_vanilla_sgd() {
        let c = cfg();
        let p0 = init_params(&c, 1).unwrap().cast::<f64>();
        let mut p = p0.clone();
        let g = filled(&c, 2.0);
        let mut v = p.zeros_like();
        sgd_momentum_step(&mut p, &g, &mut v, 0.1, 0.0).unwrap();
        for (a, b) in p.flatten().iter().zip(p0.flatten()) {
            assert!((a - (b - 0.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn velocity_alone_moves_params() {
        let c = cfg();
        let mut p = p_zero(&c);
        let g = filled(&c, 0.0);
        let mut v = filled(&c, 1.0);
        sgd_momentum_step(&mut p, &g, &mut v, 0.001, 0.9).unwrap();
        for a in p.flatten() {
            assert!((a + 0.0009).abs() < 1e-15);
        }
    }

    fn p_zero(c: &VerifierConfig) -> VerifierParams<f64> {
        VerifierParams::<f64>::zeros(c).unwrap()
    }

    #[test]
    fn two_steps_match_closed_form() {
        let c = cfg();
        let mut p = p_zero(&c);
        let g = filled(&c, 0.5);
        let mut v = p.zeros_like();
        let (lr, mu) = (0.01, 0.9);
        sgd_momentum_step(&mut p, &g, &mut v, lr, mu).unwrap();
        sgd_momentum_step(&mut p, &g, &mut v, lr, mu).unwrap();
        // v2 = g(1+μ); θ2 = −lr·g − lr·g(1+μ)
        for (vi, pi) in v.flatten().iter().zip(p.flatten()) {
            assert!((vi - 0.5 * 1.9).abs() < 1e-15);
            assert!((pi - (-0.01 * 0.5 - 0.01 * 0.95)).abs() < 1e-15);
        }
    }

    #[test]
    fn incongruent_trees_rejected() {
        let c = cfg();
        let mut p = p_zero(&c);
        let other = p_zero(&VerifierConfig { layers: 2, ..c });
        let mut v = p.zeros_like();
        assert!(matches!(
            sgd_momentum_step(&mut p, &other, &mut v, 0.1, 0.9),
            Err(Error::Consistency(_))
        ));
    }
}
