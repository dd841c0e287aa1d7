//! Native ViT image encoder (forward only).
//!
//! Weights live in a `DCVW` container whose JSON header carries the
//! architecture, so nothing about the network is hard-coded here:
//! patchify → linear patch embedding → class token + positions → optional
//! pre-layernorm → pre-norm blocks → layernorm on the class token →
//! optional projection.

use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::container::{
    pack_tensors, parse_header, read_container, unpack_tensor, write_container, TensorEntry,
};
use crate::data::clip::Frame;
use crate::error::{Error, Result};
use crate::nn::{block_forward, layer_norm_forward, Activation, BlockParams, BlockSpec, BLOCK_TENSOR_NAMES};
use crate::rng;
use crate::tensor::{add_assign, matmul, Tensor};

pub const VIT_MAGIC: &[u8; 4] = b"DCVW";
pub const VIT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitArch {
    pub image_size: usize,
    pub patch_size: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub mlp_dim: usize,
    /// Output projection width; 0 means no projection.
    #[serde(default)]
    pub proj_dim: usize,
    pub activation: Activation,
    #[serde(default)]
    pub ln_pre: bool,
    #[serde(default = "default_eps")]
    pub ln_eps: f64,
}

fn default_eps() -> f64 {
    1e-5
}

impl VitArch {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Capability(format!("unsupported ViT header: {m}")));
        if self.patch_size == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return bad(format!("image size {} not divisible by patch size {}", self.image_size, self.patch_size));
        }
        if self.heads == 0 || self.width == 0 || !self.width.is_multiple_of(self.heads) {
            return bad(format!("width {} not divisible by heads {}", self.width, self.heads));
        }
        if self.layers == 0 || self.mlp_dim == 0 {
            return bad("layers and mlp_dim must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn patches(&self) -> usize {
        (self.image_size / self.patch_size).pow(2)
    }

    pub fn tokens(&self) -> usize {
        self.patches() + 1
    }

    pub fn output_dim(&self, pre_projection: bool) -> usize {
        if self.proj_dim > 0 && !pre_projection {
            self.proj_dim
        } else {
            self.width
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VitWeights {
    pub arch: VitArch,
    pub patch_embed: Tensor,
    pub class_embedding: Tensor,
    pub positional_embedding: Tensor,
    pub ln_pre: Option<(Tensor, Tensor)>,
    pub layers: Vec<BlockParams>,
    pub ln_post: (Tensor, Tensor),
    pub proj: Option<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: VitArch,
    tensors: Vec<TensorEntry>,
}

impl VitWeights {
    fn expected_shapes(arch: &VitArch) -> Vec<(String, Vec<usize>)> {
        let w = arch.width;
        let mut out = vec![
            ("patch_embed.weight".to_string(), vec![3 * arch.patch_size * arch.patch_size, w]),
            ("class_embedding".to_string(), vec![w]),
            ("positional_embedding".to_string(), vec![arch.tokens(), w]),
        ];
        if arch.ln_pre {
            out.push(("ln_pre.scale".into(), vec![w]));
            out.push(("ln_pre.bias".into(), vec![w]));
        }
        let block = BlockParams::<f32>::zeros(w, arch.mlp_dim);
        for i in 0..arch.layers {
            for (name, t) in BLOCK_TENSOR_NAMES.iter().zip(block.tensors()) {
                out.push((format!("layers.{i}.{name}"), t.shape().to_vec()));
            }
        }
        out.push(("ln_post.scale".into(), vec![w]));
        out.push(("ln_post.bias".into(), vec![w]));
        if arch.proj_dim > 0 {
            out.push(("proj".into(), vec![w, arch.proj_dim]));
        }
        out
    }

    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("patch_embed.weight".to_string(), &self.patch_embed),
            ("class_embedding".to_string(), &self.class_embedding),
            ("positional_embedding".to_string(), &self.positional_embedding),
        ];
        if let Some((s, b)) = &self.ln_pre {
            out.push(("ln_pre.scale".into(), s));
            out.push(("ln_pre.bias".into(), b));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in BLOCK_TENSOR_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("ln_post.scale".into(), &self.ln_post.0));
        out.push(("ln_post.bias".into(), &self.ln_post.1));
        if let Some(p) = &self.proj {
            out.push(("proj".into(), p));
        }
        out
    }

    fn from_tensors(arch: VitArch, mut tensors: std::collections::VecDeque<Tensor>) -> Self {
        let mut next = || tensors.pop_front().expect("tensor count checked");
        let patch_embed = next();
        let class_embedding = next();
        let positional_embedding = next();
        let ln_pre = arch.ln_pre.then(|| (next(), next()));
        let layers = (0..arch.layers)
            .map(|_| {
                let mut b = BlockParams::zeros(arch.width, arch.mlp_dim);
                for t in b.tensors_mut() {
                    *t = next();
                }
                b
            })
            .collect();
        let ln_post = (next(), next());
        let proj = (arch.proj_dim > 0).then(&mut next);
        VitWeights { arch, patch_embed, class_embedding, positional_embedding, ln_pre, layers, ln_post, proj }
    }

    /// Randomly initialized network (N(0, 0.02) weights, unit layernorms).
    pub fn random(arch: VitArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut r = rng::rng(seed);
        let normal = Normal::new(0.0f64, 0.02).expect("valid std");
        let tensors = Self::expected_shapes(&arch)
            .into_iter()
            .map(|(name, shape)| {
                if name.ends_with(".scale") {
                    Tensor::filled(&shape, 1.0)
                } else if name.ends_with("bias") {
                    Tensor::zeros(&shape)
                } else {
                    let n: usize = shape.iter().product();
                    let data = (0..n).map(|_| normal.sample(&mut r) as f32).collect();
                    Tensor::from_vec(&shape, data).expect("shape matches")
                }
            })
            .collect();
        Ok(Self::from_tensors(arch, tensors))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (tensors, payload) = pack_tensors(self.named());
        let header = serde_json::to_vec(&Header { arch: self.arch.clone(), tensors })?;
        Ok(write_container(VIT_MAGIC, VIT_VERSION, &header, &payload))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = read_container(bytes, VIT_MAGIC, VIT_VERSION)
            .map_err(|e| Error::Capability(format!("unsupported weights file: {e}")))?;
        let header: Header = parse_header(&c)
            .map_err(|e| Error::Capability(format!("unsupported weights header: {e}")))?;
        header.arch.validate()?;
        let expected = Self::expected_shapes(&header.arch);
        if expected.len() != header.tensors.len() {
            return Err(Error::Capability(format!(
                "weights list {} tensors, architecture implies {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        let mut tensors = std::collections::VecDeque::new();
        for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
            if &entry.name != name || &entry.shape != shape {
                return Err(Error::Capability(format!(
                    "weights tensor '{}' {:?} where '{name}' {shape:?} was expected",
                    entry.name, entry.shape
                )));
            }
            tensors.push_back(unpack_tensor(&c, entry)?);
        }
        Ok(Self::from_tensors(header.arch, tensors))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }
}

/// Per-channel input normalization `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { mean: [0.0; 3], std: [1.0; 3] }
    }
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        if self.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config(format!("invalid normalization {self:?}")));
        }
        Ok(())
    }
}

/// Feature vector of one normalized ([0, 1]) frame.
pub fn vit_forward_frame(
    w: &VitWeights,
    frame: &Frame,
    norm: &Normalization,
    pre_projection: bool,
) -> Result<Vec<f32>> {
    let a = &w.arch;
    if frame.height != a.image_size || frame.width != a.image_size {
        return Err(Error::Dimension(format!(
            "frame {}×{} does not match encoder input {}",
            frame.height, frame.width, a.image_size
        )));
    }
    let p = a.patch_size;
    let grid = a.image_size / p;
    let k = 3 * p * p;
    let mut patches = Vec::with_capacity(a.patches() * k);
    for gy in 0..grid {
        for gx in 0..grid {
            for py in 0..p {
                for px in 0..p {
                    for c in 0..3 {
                        let v = frame.at(gy * p + py, gx * p + px, c);
                        patches.push((v - norm.mean[c]) / norm.std[c]);
                    }
                }
            }
        }
    }
    let emb = matmul(&patches, w.patch_embed.data(), a.patches(), k, a.width);
    let mut z = Vec::with_capacity(a.tokens() * a.width);
    z.extend_from_slice(w.class_embedding.data());
    z.extend_from_slice(&emb);
    add_assign(&mut z, w.positional_embedding.data());
    if let Some((s, b)) = &w.ln_pre {
        z = layer_norm_forward(&z, a.width, s.data(), b.data(), a.ln_eps).0;
    }
    let spec = BlockSpec {
        tokens: a.tokens(),
        width: a.width,
        heads: a.heads,
        mlp: a.mlp_dim,
        activation: a.activation,
        eps: a.ln_eps,
    };
    for layer in &w.layers {
        z = block_forward(&z, layer, &spec, None).0;
    }
    let cls = layer_norm_forward(&z[..a.width], a.width, w.ln_post.0.data(), w.ln_post.1.data(), a.ln_eps).0;
    Ok(match (&w.proj, pre_projection) {
        (Some(proj), false) => matmul(&cls, proj.data(), 1, a.width, a.proj_dim),
        _ => cls,
    })
}
