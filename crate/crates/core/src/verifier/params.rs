use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{BlockParams, BLOCK_TENSOR_NAMES};
use crate::rng;
use crate::tensor::{Scalar, Tensor};

use super::VerifierConfig;

pub const INIT_STD: f64 = 0.02;

/// Classification head: layernorm, optional hidden GELU layer, linear to two logits.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T = f32> {
    pub ln_scale: Tensor<T>,
    pub ln_bias: Tensor<T>,
    pub hidden: Option<(Tensor<T>, Tensor<T>)>,
    pub out_weight: Tensor<T>,
    pub out_bias: Tensor<T>,
}

/// All learnable weights of the verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierParams<T = f32> {
    pub config: VerifierConfig,
    pub class_embedding: Tensor<T>,
    pub positional_embedding: Tensor<T>,
    pub layers: Vec<BlockParams<T>>,
    pub head: HeadParams<T>,
}

/// Gradients share the parameter tree layout.
pub type Gradients<T = f32> = VerifierParams<T>;

impl<T: Scalar> VerifierParams<T> {
    pub fn zeros(config: &VerifierConfig) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let head_in = if config.head_hidden > 0 { config.head_hidden } else { d };
        Ok(VerifierParams {
            config: config.clone(),
            class_embedding: Tensor::zeros(&[d]),
            positional_embedding: Tensor::zeros(&[config.tokens(), d]),
            layers: (0..config.layers)
                .map(|_| BlockParams::zeros(d, config.mlp_hidden))
                .collect(),
            head: HeadParams {
                ln_scale: Tensor::zeros(&[d]),
                ln_bias: Tensor::zeros(&[d]),
                hidden: (config.head_hidden > 0).then(|| {
                    (
                        Tensor::zeros(&[d, config.head_hidden]),
                        Tensor::zeros(&[config.head_hidden]),
                    )
                }),
                out_weight: Tensor::zeros(&[head_in, 2]),
                out_bias: Tensor::zeros(&[2]),
            },
        })
    }

    /// Gradient accumulator with the same layout.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config already validated")
    }

    /// Every tensor with its stable name, in serialization order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("class_embedding".to_string(), &self.class_embedding),
            ("positional_embedding".to_string(), &self.positional_embedding),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in BLOCK_TENSOR_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("head.ln.scale".into(), &self.head.ln_scale));
        out.push(("head.ln.bias".into(), &self.head.ln_bias));
        if let Some((w, b)) = &self.head.hidden {
            out.push(("head.hidden.weight".into(), w));
            out.push(("head.hidden.bias".into(), b));
        }
        out.push(("head.out.weight".into(), &self.head.out_weight));
        out.push(("head.out.bias".into(), &self.head.out_bias));
        out
    }

    /// Mutable tensors in the same order as [`named`](Self::named).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.class_embedding, &mut self.positional_embedding];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.head.ln_scale);
        out.push(&mut self.head.ln_bias);
        if let Some((w, b)) = &mut self.head.hidden {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.head.out_weight);
        out.push(&mut self.head.out_bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> VerifierParams<U> {
        let mut out = VerifierParams::<U>::zeros(&self.config).expect("valid config");
        for ((_, src), dst) in self.named().into_iter().zip(out.tensors_mut()) {
            *dst = src.cast();
        }
        out
    }

    /// Flattened view of all parameters in `named` order.
    pub fn flatten(&self) -> Vec<T> {
        self.named()
            .into_iter()
            .flat_map(|(_, t)| t.data().iter().copied())
            .collect()
    }

    /// Overwrites every parameter from a flat vector in `named` order.
    pub fn assign_flat(&mut self, values: &[T]) -> Result<()> {
        let total = self.param_count();
        if values.len() != total {
            return Err(Error::Dimension(format!(
                "flat parameter vector has {} entries, expected {total}",
                values.len()
            )));
        }
        let mut rest = values;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.data_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Checks that `other` has exactly the same tree layout.
    pub fn check_congruent<U: Scalar>(&self, other: &VerifierParams<U>) -> Result<()> {
        let a = self.named();
        let b = other.named();
        if a.len() != b.len() {
            return Err(Error::Consistency(format!(
                "parameter trees differ in tensor count: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        for ((na, ta), (_, tb)) in a.iter().zip(&b) {
            if ta.shape() != tb.shape() {
                return Err(Error::Consistency(format!(
                    "tensor '{na}' shape {:?} vs {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Draws initial weights: N(0, 0.02) everywhere except layernorm scales (1),
/// biases (0) and the head output layer (0).
pub fn init_params(config: &VerifierConfig, seed: u64) -> Result<VerifierParams<f32>> {
    let mut params = VerifierParams::<f32>::zeros(config)?;
    let mut rng = rng::rng(seed);
    let normal = Normal::new(0.0f64, INIT_STD).expect("valid std");
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    for (name, t) in names.iter().zip(params.tensors_mut()) {
        if name.ends_with(".scale") {
            t.fill(1.0);
        } else if name.ends_with("bias") || name.starts_with("head.out.") {
            t.fill(0.0);
        } else {
            for v in t.data_mut() {
                *v = normal.sample(&mut rng) as f32;
            }
        }
    }
    Ok(params)
}
