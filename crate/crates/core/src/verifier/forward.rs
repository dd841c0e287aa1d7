use crate::error::{Error, Result};
use crate::nn::{
    block_backward, block_forward, layer_norm_backward, layer_norm_forward, Activation,
    BlockCache, BlockSpec, LayerNormCache,
};
use crate::rng;
use crate::sequence::FeatureSequence;
use crate::tensor::{add_assign, matmul, matmul_at_acc, matmul_bt, Scalar, Tensor};

use super::{Gradients, VerifierConfig, VerifierParams, LAYER_NORM_EPS};

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardTrace<T = f32> {
    pub logits: Tensor<T>,
    /// Seed the dropout masks were drawn from; `None` in eval mode.
    pub rng_seed: Option<u64>,
    config: VerifierConfig,
    blocks: Vec<BlockCache<T>>,
    head_ln: LayerNormCache<T>,
    head_ln_out: Vec<T>,
    head_pre_act: Option<Vec<T>>,
    head_act: Option<Vec<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn training(&self) -> bool {
        self.rng_seed.is_some()
    }

    pub fn config(&self) -> &VerifierConfig {
        &self.config
    }

    /// Attention probabilities of layer `i` (`heads×tokens×tokens`).
    pub fn attention_probs(&self, layer: usize) -> &[T] {
        self.blocks[layer].attention_probs()
    }

    pub fn has_dropout_masks(&self) -> bool {
        self.blocks.iter().all(|b| b.has_dropout_masks())
    }
}

pub(crate) fn block_spec(config: &VerifierConfig) -> BlockSpec {
    BlockSpec {
        tokens: config.tokens(),
        width: config.width,
        heads: config.heads,
        mlp: config.mlp_hidden,
        activation: Activation::Gelu,
        eps: LAYER_NORM_EPS,
    }
}

/// Forward pass on an `L×D` feature tensor of any precision.
///
/// In training mode dropout masks are drawn from `seed` and recorded in the
/// trace; in eval mode no masks are drawn and `seed` is ignored.
pub fn forward_tensor<T: Scalar>(
    features: &Tensor<T>,
    params: &VerifierParams<T>,
    training: bool,
    seed: u64,
) -> Result<ForwardTrace<T>> {
    let cfg = &params.config;
    if features.shape() != [cfg.seq_len, cfg.width] {
        return Err(Error::Dimension(format!(
            "feature sequence shape {:?} does not match verifier L×D = [{}, {}]",
            features.shape(),
            cfg.seq_len,
            cfg.width
        )));
    }
    let d = cfg.width;
    let spec = block_spec(cfg);

    let mut z = Vec::with_capacity(spec.tokens * d);
    z.extend_from_slice(params.class_embedding.data());
    z.extend_from_slice(features.data());
    add_assign(&mut z, params.positional_embedding.data());

    let mut dropout_rng = training.then(|| rng::rng(seed));
    let mut blocks = Vec::with_capacity(cfg.layers);
    for layer in &params.layers {
        let dropout = dropout_rng.as_mut().map(|r| (cfg.dropout, r));
        let (out, cache) = block_forward(&z, layer, &spec, dropout);
        z = out;
        blocks.push(cache);
    }

    let head = &params.head;
    let (hc, head_ln) = layer_norm_forward(
        &z[..d],
        d,
        head.ln_scale.data(),
        head.ln_bias.data(),
        LAYER_NORM_EPS,
    );
    let (head_in, head_pre_act, head_act) = match &head.hidden {
        Some((w, b)) => {
            let hh = b.len();
            let mut u = matmul(&hc, w.data(), 1, d, hh);
            add_assign(&mut u, b.data());
            let g: Vec<T> = u.iter().map(|&x| Activation::Gelu.apply(x)).collect();
            (g.clone(), Some(u), Some(g))
        }
        None => (hc.clone(), None, None),
    };
    let mut logits = matmul(&head_in, head.out_weight.data(), 1, head_in.len(), 2);
    add_assign(&mut logits, head.out_bias.data());
    let logits = Tensor::from_vec(&[2], logits)?;
    if !logits.is_finite() {
        return Err(Error::Data("verifier produced non-finite logits".into()));
    }

    Ok(ForwardTrace {
        logits,
        rng_seed: training.then_some(seed),
        config: cfg.clone(),
        blocks,
        head_ln,
        head_ln_out: hc,
        head_pre_act,
        head_act,
    })
}

/// Forward pass of the verifier on one feature sequence.
pub fn verifier_forward(
    seq: &FeatureSequence,
    params: &VerifierParams<f32>,
    training: bool,
    seed: u64,
) -> Result<ForwardTrace<f32>> {
    forward_tensor(seq.features(), params, training, seed)
}

/// Exact reverse-mode gradients of a scalar loss given `dloss/dlogits`,
/// reusing the dropout masks recorded in `trace`.
pub fn verifier_backward<T: Scalar>(
    trace: &ForwardTrace<T>,
    dlogits: &Tensor<T>,
    params: &VerifierParams<T>,
) -> Result<Gradients<T>> {
    if trace.config != params.config || trace.blocks.len() != params.layers.len() {
        return Err(Error::Consistency(
            "forward trace was produced with a different verifier configuration".into(),
        ));
    }
    if dlogits.len() != 2 {
        return Err(Error::Dimension(format!("dlogits must have 2 entries, got {}", dlogits.len())));
    }
    let cfg = &params.config;
    let d = cfg.width;
    let spec = block_spec(cfg);
    let mut grads = params.zeros_like();
    let head = &params.head;

    let dl = dlogits.data();
    let head_in: &[T] = trace.head_act.as_deref().unwrap_or(&trace.head_ln_out);
    matmul_at_acc(head_in, dl, 1, head_in.len(), 2, grads.head.out_weight.data_mut());
    add_assign(grads.head.out_bias.data_mut(), dl);
    let dhead_in = matmul_bt(dl, head.out_weight.data(), 1, 2, head_in.len());

    let dhc = match (&head.hidden, &mut grads.head.hidden) {
        (Some((w, _)), Some((gw, gb))) => {
            let u = trace.head_pre_act.as_ref().expect("hidden head cache");
            let du: Vec<T> = dhead_in
                .iter()
                .zip(u)
                .map(|(&g, &x)| g * Activation::Gelu.derivative(x))
                .collect();
            matmul_at_acc(&trace.head_ln_out, &du, 1, d, du.len(), gw.data_mut());
            add_assign(gb.data_mut(), &du);
            matmul_bt(&du, w.data(), 1, du.len(), d)
        }
        _ => dhead_in,
    };
    let dcls = layer_norm_backward(
        &dhc,
        &trace.head_ln,
        head.ln_scale.data(),
        grads.head.ln_scale.data_mut(),
        grads.head.ln_bias.data_mut(),
    );

    let mut dz = vec![T::zero(); spec.tokens * d];
    dz[..d].copy_from_slice(&dcls);
    for ((cache, layer), glayer) in trace
        .blocks
        .iter()
        .zip(&params.layers)
        .zip(&mut grads.layers)
        .rev()
    {
        dz = block_backward(&dz, cache, layer, &spec, glayer);
    }

    grads.positional_embedding.data_mut().copy_from_slice(&dz);
    grads.class_embedding.data_mut().copy_from_slice(&dz[..d]);
    Ok(grads)
}

/// Probability that `seq` is generated (label 1), eval mode.
pub fn predict(seq: &FeatureSequence, params: &VerifierParams<f32>) -> Result<f32> {
    let trace = verifier_forward(seq, params, false, 0)?;
    Ok(score_from_logits(trace.logits.data()))
}

/// `softmax(logits)[1]`, computed as a logistic of the logit gap.
pub fn score_from_logits<T: Scalar>(logits: &[T]) -> T {
    let gap = logits[1] - logits[0];
    if gap >= T::zero() {
        T::one() / (T::one() + (-gap).exp())
    } else {
        let e = gap.exp();
        e / (T::one() + e)
    }
}
