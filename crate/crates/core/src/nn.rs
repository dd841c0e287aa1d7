//! Pre-norm transformer encoder block with hand-written reverse mode.
//!
//! Shared by the verifier and by the native ViT backend (forward only).
//! Linear layers use the `y = x·W + b` convention with `W` stored `in×out`.

use rand::Rng as _;

use crate::rng::Rng;
use crate::tensor::{
    add_assign, add_row_bias, matmul, matmul_at_acc, matmul_bt, softmax_in_place, sum_rows_acc,
    Scalar, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Exact erf-based GELU.
    Gelu,
    /// `x·σ(1.702x)`, the CLIP variant.
    QuickGelu,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        let xf = x.as_f64();
        let y = match self {
            Activation::Gelu => 0.5 * xf * (1.0 + libm::erf(xf / SQRT_2)),
            Activation::QuickGelu => xf / (1.0 + (-1.702 * xf).exp()),
        };
        T::of(y)
    }

    pub fn derivative<T: Scalar>(self, x: T) -> T {
        let xf = x.as_f64();
        let d = match self {
            Activation::Gelu => {
                0.5 * (1.0 + libm::erf(xf / SQRT_2)) + xf * INV_SQRT_2PI * (-0.5 * xf * xf).exp()
            }
            Activation::QuickGelu => {
                let s = 1.0 / (1.0 + (-1.702 * xf).exp());
                s + 1.702 * xf * s * (1.0 - s)
            }
        };
        T::of(d)
    }
}

pub struct LayerNormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

pub fn layer_norm_forward<T: Scalar>(
    x: &[T],
    width: usize,
    scale: &[T],
    bias: &[T],
    eps: f64,
) -> (Vec<T>, LayerNormCache<T>) {
    let rows = x.len() / width;
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    let n = T::of(width as f64);
    for r in 0..rows {
        let xr = &x[r * width..(r + 1) * width];
        let mean = xr.iter().fold(T::zero(), |a, &v| a + v) / n;
        let var = xr.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
        let rs = T::one() / (var + T::of(eps)).sqrt();
        rstd[r] = rs;
        for c in 0..width {
            let h = (xr[c] - mean) * rs;
            xhat[r * width + c] = h;
            y[r * width + c] = h * scale[c] + bias[c];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

/// Returns `dx`; accumulates into `dscale` / `dbias`.
pub fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    cache: &LayerNormCache<T>,
    scale: &[T],
    dscale: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let width = scale.len();
    let rows = dy.len() / width;
    let n = T::of(width as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); width];
    for r in 0..rows {
        let dyr = &dy[r * width..(r + 1) * width];
        let xh = &cache.xhat[r * width..(r + 1) * width];
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for c in 0..width {
            dscale[c] = dscale[c] + dyr[c] * xh[c];
            dbias[c] = dbias[c] + dyr[c];
            dxhat[c] = dyr[c] * scale[c];
            sum_d = sum_d + dxhat[c];
            sum_dx = sum_dx + dxhat[c] * xh[c];
        }
        let k = cache.rstd[r] / n;
        for c in 0..width {
            dx[r * width + c] = k * (n * dxhat[c] - sum_d - xh[c] * sum_dx);
        }
    }
    dx
}

/// Parameters of one pre-norm encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T = f32> {
    pub ln1_scale: Tensor<T>,
    pub ln1_bias: Tensor<T>,
    pub wq: Tensor<T>,
    pub bq: Tensor<T>,
    pub wk: Tensor<T>,
    pub bk: Tensor<T>,
    pub wv: Tensor<T>,
    pub bv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub ln2_scale: Tensor<T>,
    pub ln2_bias: Tensor<T>,
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

pub const BLOCK_TENSOR_NAMES: [&str; 16] = [
    "ln1.scale",
    "ln1.bias",
    "attn.q.weight",
    "attn.q.bias",
    "attn.k.weight",
    "attn.k.bias",
    "attn.v.weight",
    "attn.v.bias",
    "attn.out.weight",
    "attn.out.bias",
    "ln2.scale",
    "ln2.bias",
    "mlp.fc1.weight",
    "mlp.fc1.bias",
    "mlp.fc2.weight",
    "mlp.fc2.bias",
];

impl<T: Scalar> BlockParams<T> {
    pub fn zeros(width: usize, mlp: usize) -> Self {
        let z = |s: &[usize]| Tensor::zeros(s);
        BlockParams {
            ln1_scale: z(&[width]),
            ln1_bias: z(&[width]),
            wq: z(&[width, width]),
            bq: z(&[width]),
            wk: z(&[width, width]),
            bk: z(&[width]),
            wv: z(&[width, width]),
            bv: z(&[width]),
            wo: z(&[width, width]),
            bo: z(&[width]),
            ln2_scale: z(&[width]),
            ln2_bias: z(&[width]),
            w1: z(&[width, mlp]),
            b1: z(&[mlp]),
            w2: z(&[mlp, width]),
            b2: z(&[width]),
        }
    }

    /// Tensors in `BLOCK_TENSOR_NAMES` order.
    pub fn tensors(&self) -> [&Tensor<T>; 16] {
        [
            &self.ln1_scale,
            &self.ln1_bias,
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln2_scale,
            &self.ln2_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 16] {
        [
            &mut self.ln1_scale,
            &mut self.ln1_bias,
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln2_scale,
            &mut self.ln2_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    pub fn width(&self) -> usize {
        self.ln1_scale.len()
    }

    pub fn mlp(&self) -> usize {
        self.b1.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlockSpec {
    pub tokens: usize,
    pub width: usize,
    pub heads: usize,
    pub mlp: usize,
    pub activation: Activation,
    pub eps: f64,
}

impl BlockSpec {
    fn head_dim(&self) -> usize {
        self.width / self.heads
    }
}

/// Activations cached by `block_forward` for the backward pass.
pub struct BlockCache<T> {
    ln1: LayerNormCache<T>,
    h1: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// Attention probabilities before dropout, `heads×tokens×tokens`.
    probs: Vec<T>,
    attn_mask: Option<Vec<T>>,
    /// Concatenated head outputs, `tokens×width`.
    attn_out: Vec<T>,
    ln2: LayerNormCache<T>,
    h2: Vec<T>,
    pre_act: Vec<T>,
    act: Vec<T>,
    mlp_mask: Option<Vec<T>>,
}

impl<T: Scalar> BlockCache<T> {
    pub fn attention_probs(&self) -> &[T] {
        &self.probs
    }

    pub fn has_dropout_masks(&self) -> bool {
        self.attn_mask.is_some() && self.mlp_mask.is_some()
    }
}

/// Inverted-dropout mask: entries are `0` or `1/(1-p)`.
fn dropout_mask<T: Scalar>(len: usize, p: f64, rng: &mut Rng) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - p));
    (0..len)
        .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
        .collect()
}

pub fn block_forward<T: Scalar>(
    x: &[T],
    p: &BlockParams<T>,
    spec: &BlockSpec,
    dropout: Option<(f64, &mut Rng)>,
) -> (Vec<T>, BlockCache<T>) {
    let (n, d, heads, dh, m) = (spec.tokens, spec.width, spec.heads, spec.head_dim(), spec.mlp);
    let scale = T::of(1.0 / (dh as f64).sqrt());

    let (h1, ln1) = layer_norm_forward(x, d, p.ln1_scale.data(), p.ln1_bias.data(), spec.eps);
    let mut q = matmul(&h1, p.wq.data(), n, d, d);
    add_row_bias(&mut q, p.bq.data());
    let mut k = matmul(&h1, p.wk.data(), n, d, d);
    add_row_bias(&mut k, p.bk.data());
    let mut v = matmul(&h1, p.wv.data(), n, d, d);
    add_row_bias(&mut v, p.bv.data());

    let mut probs = vec![T::zero(); heads * n * n];
    for h in 0..heads {
        for i in 0..n {
            let qi = &q[i * d + h * dh..i * d + (h + 1) * dh];
            let row = &mut probs[(h * n + i) * n..(h * n + i + 1) * n];
            for j in 0..n {
                let kj = &k[j * d + h * dh..j * d + (h + 1) * dh];
                row[j] = crate::tensor::dot(qi, kj) * scale;
            }
            softmax_in_place(row);
        }
    }

    let (attn_mask, mlp_mask) = match dropout {
        Some((rate, rng)) => (
            Some(dropout_mask(heads * n * n, rate, rng)),
            Some(dropout_mask(n * d, rate, rng)),
        ),
        None => (None, None),
    };

    let mut attn_out = vec![T::zero(); n * d];
    for h in 0..heads {
        for i in 0..n {
            let base = (h * n + i) * n;
            for j in 0..n {
                let mut pij = probs[base + j];
                if let Some(mask) = &attn_mask {
                    pij = pij * mask[base + j];
                }
                if pij == T::zero() {
                    continue;
                }
                for c in 0..dh {
                    let o = &mut attn_out[i * d + h * dh + c];
                    *o = *o + pij * v[j * d + h * dh + c];
                }
            }
        }
    }

    let mut x1 = matmul(&attn_out, p.wo.data(), n, d, d);
    add_row_bias(&mut x1, p.bo.data());
    add_assign(&mut x1, x);

    let (h2, ln2) = layer_norm_forward(&x1, d, p.ln2_scale.data(), p.ln2_bias.data(), spec.eps);
    let mut pre_act = matmul(&h2, p.w1.data(), n, d, m);
    add_row_bias(&mut pre_act, p.b1.data());
    let act: Vec<T> = pre_act.iter().map(|&u| spec.activation.apply(u)).collect();
    let mut mlp_out = matmul(&act, p.w2.data(), n, m, d);
    add_row_bias(&mut mlp_out, p.b2.data());
    if let Some(mask) = &mlp_mask {
        for (o, &mk) in mlp_out.iter_mut().zip(mask) {
            *o = *o * mk;
        }
    }
    add_assign(&mut x1, &mlp_out);

    let cache = BlockCache {
        ln1,
        h1,
        q,
        k,
        v,
        probs,
        attn_mask,
        attn_out,
        ln2,
        h2,
        pre_act,
        act,
        mlp_mask,
    };
    (x1, cache)
}

/// Reverse pass through one block. Accumulates parameter gradients into
/// `grads` and returns the gradient with respect to the block input.
pub fn block_backward<T: Scalar>(
    dout: &[T],
    cache: &BlockCache<T>,
    p: &BlockParams<T>,
    spec: &BlockSpec,
    grads: &mut BlockParams<T>,
) -> Vec<T> {
    let (n, d, heads, dh, m) = (spec.tokens, spec.width, spec.heads, spec.head_dim(), spec.mlp);
    let scale = T::of(1.0 / (dh as f64).sqrt());

    // MLP branch.
    let mut dmlp = dout.to_vec();
    if let Some(mask) = &cache.mlp_mask {
        for (g, &mk) in dmlp.iter_mut().zip(mask) {
            *g = *g * mk;
        }
    }
    matmul_at_acc(&cache.act, &dmlp, n, m, d, grads.w2.data_mut());
    sum_rows_acc(&dmlp, grads.b2.data_mut());
    let mut dpre = matmul_bt(&dmlp, p.w2.data(), n, d, m);
    for (g, &u) in dpre.iter_mut().zip(&cache.pre_act) {
        *g = *g * spec.activation.derivative(u);
    }
    matmul_at_acc(&cache.h2, &dpre, n, d, m, grads.w1.data_mut());
    sum_rows_acc(&dpre, grads.b1.data_mut());
    let dh2 = matmul_bt(&dpre, p.w1.data(), n, m, d);
    let mut dx1 = layer_norm_backward(
        &dh2,
        &cache.ln2,
        p.ln2_scale.data(),
        grads.ln2_scale.data_mut(),
        grads.ln2_bias.data_mut(),
    );
    add_assign(&mut dx1, dout);

    // Attention branch.
    matmul_at_acc(&cache.attn_out, &dx1, n, d, d, grads.wo.data_mut());
    sum_rows_acc(&dx1, grads.bo.data_mut());
    let dattn = matmul_bt(&dx1, p.wo.data(), n, d, d);

    let mut dq = vec![T::zero(); n * d];
    let mut dk = vec![T::zero(); n * d];
    let mut dv = vec![T::zero(); n * d];
    let mut dp = vec![T::zero(); n];
    for h in 0..heads {
        for i in 0..n {
            let base = (h * n + i) * n;
            let doi = &dattn[i * d + h * dh..i * d + (h + 1) * dh];
            // d(probs after dropout) and dv.
            for j in 0..n {
                let vj = &cache.v[j * d + h * dh..j * d + (h + 1) * dh];
                let mut g = crate::tensor::dot(doi, vj);
                let mut pij = cache.probs[base + j];
                if let Some(mask) = &cache.attn_mask {
                    g = g * mask[base + j];
                    pij = pij * mask[base + j];
                }
                dp[j] = g;
                if pij != T::zero() {
                    for c in 0..dh {
                        let t = &mut dv[j * d + h * dh + c];
                        *t = *t + pij * doi[c];
                    }
                }
            }
            // Softmax backward.
            let prow = &cache.probs[base..base + n];
            let inner = prow
                .iter()
                .zip(&dp)
                .fold(T::zero(), |a, (&pp, &g)| a + pp * g);
            for j in 0..n {
                let ds = prow[j] * (dp[j] - inner) * scale;
                if ds == T::zero() {
                    continue;
                }
                for c in 0..dh {
                    let qi = cache.q[i * d + h * dh + c];
                    let kj = cache.k[j * d + h * dh + c];
                    dq[i * d + h * dh + c] = dq[i * d + h * dh + c] + ds * kj;
                    dk[j * d + h * dh + c] = dk[j * d + h * dh + c] + ds * qi;
                }
            }
        }
    }

    matmul_at_acc(&cache.h1, &dq, n, d, d, grads.wq.data_mut());
    sum_rows_acc(&dq, grads.bq.data_mut());
    matmul_at_acc(&cache.h1, &dk, n, d, d, grads.wk.data_mut());
    sum_rows_acc(&dk, grads.bk.data_mut());
    matmul_at_acc(&cache.h1, &dv, n, d, d, grads.wv.data_mut());
    sum_rows_acc(&dv, grads.bv.data_mut());
    let mut dh1 = matmul_bt(&dq, p.wq.data(), n, d, d);
    add_assign(&mut dh1, &matmul_bt(&dk, p.wk.data(), n, d, d));
    add_assign(&mut dh1, &matmul_bt(&dv, p.wv.data(), n, d, d));
    let mut dx = layer_norm_backward(
        &dh1,
        &cache.ln1,
        p.ln1_scale.data(),
        grads.ln1_scale.data_mut(),
        grads.ln1_bias.data_mut(),
    );
    add_assign(&mut dx, &dx1);
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for act in [Activation::Gelu, Activation::QuickGelu] {
            for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x)).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }

    #[test]
    fn gelu_reference_values() {
        // 0.5·x·(1+erf(x/√2)) at x = 1: Φ(1) = 0.841344746...
        assert!((Activation::Gelu.apply(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert_eq!(Activation::Gelu.apply(0.0f64), 0.0);
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        let (y, _) = layer_norm_forward(&x, 4, &[1.0; 4], &[0.0; 4], 0.0);
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
