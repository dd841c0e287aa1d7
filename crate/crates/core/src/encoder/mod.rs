//! Frozen image encoders that turn preprocessed clips into feature sequences.
//!
//! Three interchangeable backends: precomputed feature-cache files, an
//! external process speaking the `DCRQ`/`DCRS` protocol, and a native ViT
//! forward pass. Backends are read-only after construction and may be shared
//! across threads.

pub mod cache;
pub mod external;
pub mod protocol;
pub mod stub;
pub mod vit;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::clip::{ClipTensor, Stage};
use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

pub use cache::{cache_path, load_feature_cache, write_feature_cache};
pub use external::{ChildMode, ExternalEncoder};
pub use protocol::{EncodeRequest, EncodeResponse, FRAME_SIZE};
pub use vit::{vit_forward_frame, Normalization, VitArch, VitWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Cache,
    External,
    Native,
}

/// Which ViT embedding the native backend returns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    PreProjection,
    #[default]
    PostProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderBackendConfig {
    pub kind: BackendKind,
    pub encoder_id: String,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub external_cmd: Vec<String>,
    #[serde(default)]
    pub external_mode: ChildMode,
    #[serde(default)]
    pub weights_path: Option<PathBuf>,
    /// Sidecar JSON `{"mean": [..3], "std": [..3]}` for the native backend.
    #[serde(default)]
    pub normalization_path: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputMode,
    /// Expected feature width; checked against every encoded sequence when set.
    #[serde(default)]
    pub dim: Option<usize>,
}

impl EncoderBackendConfig {
    pub fn cache(dir: impl Into<PathBuf>, encoder_id: impl Into<String>) -> Self {
        EncoderBackendConfig {
            kind: BackendKind::Cache,
            encoder_id: encoder_id.into(),
            cache_dir: Some(dir.into()),
            external_cmd: Vec::new(),
            external_mode: ChildMode::Shared,
            weights_path: None,
            normalization_path: None,
            output: OutputMode::PostProjection,
            dim: None,
        }
    }

    pub fn external(argv: Vec<String>, encoder_id: impl Into<String>) -> Self {
        EncoderBackendConfig {
            kind: BackendKind::External,
            external_cmd: argv,
            cache_dir: None,
            ..Self::cache(PathBuf::new(), encoder_id)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_id.trim().is_empty() {
            return Err(Error::Config("backend encoder_id must be non-empty".into()));
        }
        let missing = |field: &str| {
            Err(Error::Config(format!("{:?} backend requires '{field}'", self.kind).to_lowercase()))
        };
        match self.kind {
            BackendKind::Cache if self.cache_dir.is_none() => missing("cache_dir"),
            BackendKind::External if self.external_cmd.is_empty() => missing("external_cmd"),
            BackendKind::Native if self.weights_path.is_none() => missing("weights_path"),
            _ => Ok(()),
        }
    }

    /// Reads a JSON config; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("backend config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.cache_dir, &mut cfg.weights_path, &mut cfg.normalization_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Inner {
    Cache { dir: PathBuf },
    External(ExternalEncoder),
    Native { weights: Box<VitWeights>, norm: Normalization, pre_projection: bool },
}

pub struct Backend {
    config: EncoderBackendConfig,
    inner: Inner,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend").field("config", &self.config).finish()
    }
}

impl Backend {
    pub fn from_config(config: EncoderBackendConfig) -> Result<Self> {
        config.validate()?;
        let inner = match config.kind {
            BackendKind::Cache => Inner::Cache { dir: config.cache_dir.clone().expect("validated") },
            BackendKind::External => {
                Inner::External(ExternalEncoder::new(config.external_cmd.clone(), config.external_mode)?)
            }
            BackendKind::Native => {
                let path = config.weights_path.as_ref().expect("validated");
                let weights = VitWeights::load(path)?;
                if weights.arch.image_size != FRAME_SIZE {
                    return Err(Error::Capability(format!(
                        "weights expect {}px input, frames are {FRAME_SIZE}px",
                        weights.arch.image_size
                    )));
                }
                let norm = match &config.normalization_path {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                        let n: Normalization = serde_json::from_str(&text)
                            .map_err(|e| Error::Config(format!("normalization {}: {e}", p.display())))?;
                        n.validate()?;
                        n
                    }
                    None => Normalization::default(),
                };
                let pre_projection = config.output == OutputMode::PreProjection;
                Inner::Native { weights: Box::new(weights), norm, pre_projection }
            }
        };
        Ok(Backend { config, inner })
    }

    pub fn config(&self) -> &EncoderBackendConfig {
        &self.config
    }

    pub fn encoder_id(&self) -> &str {
        &self.config.encoder_id
    }

    /// Whether the backend computes features from pixels (cache backends only look them up).
    pub fn encodes_pixels(&self) -> bool {
        !matches!(self.inner, Inner::Cache { .. })
    }

    /// Cached sequence for a video id (cache backend only).
    pub fn load_cached(&self, video_id: &str) -> Result<FeatureSequence> {
        let Inner::Cache { dir } = &self.inner else {
            return Err(Error::Capability("only the cache backend can look up video ids".into()));
        };
        let path = cache_path(dir, video_id);
        if !path.exists() {
            return Err(Error::Backend(format!("no cached features for '{video_id}' at {}", path.display())));
        }
        let fs = load_feature_cache(&path)?;
        if fs.video_id != video_id {
            return Err(Error::Contract(format!(
                "cache file {} holds '{}', expected '{video_id}'",
                path.display(),
                fs.video_id
            )));
        }
        if fs.encoder_id != self.config.encoder_id {
            return Err(Error::Contract(format!(
                "cache file {} was produced by encoder '{}', backend is '{}'",
                path.display(),
                fs.encoder_id,
                self.config.encoder_id
            )));
        }
        self.check_dim(fs)
    }

    fn check_dim(&self, fs: FeatureSequence) -> Result<FeatureSequence> {
        match self.config.dim {
            Some(d) if d != fs.dim() => Err(Error::Contract(format!(
                "encoder '{}' produced D={}, config expects {d}",
                self.config.encoder_id,
                fs.dim()
            ))),
            _ => Ok(fs),
        }
    }

    /// Encodes a preprocessed `L×224×224` clip into `L×D` features.
    pub fn encode_clip(&self, clip: &ClipTensor) -> Result<FeatureSequence> {
        if clip.stage != Stage::Normalized {
            return Err(Error::Contract(format!("clip '{}' has not been preprocessed", clip.video_id)));
        }
        if clip.height() != FRAME_SIZE || clip.width() != FRAME_SIZE {
            return Err(Error::Contract(format!(
                "clip '{}' is {}×{}, encoders take {FRAME_SIZE}×{FRAME_SIZE}",
                clip.video_id,
                clip.height(),
                clip.width()
            )));
        }
        let l = clip.len();
        let (dim, features) = match &self.inner {
            Inner::Cache { .. } => {
                let fs = self.load_cached(&clip.video_id)?;
                if fs.len() != l {
                    return Err(Error::Contract(format!(
                        "cached '{}' has {} rows, clip has {l} frames",
                        clip.video_id,
                        fs.len()
                    )));
                }
                return Ok(fs);
            }
            Inner::External(ext) => {
                let mut pixels = Vec::with_capacity(l * FRAME_SIZE * FRAME_SIZE * 3);
                for f in &clip.frames {
                    pixels.extend_from_slice(&f.data);
                }
                let req = EncodeRequest { frames: l, height: FRAME_SIZE, width: FRAME_SIZE, pixels };
                ext.encode(&req)?
            }
            Inner::Native { weights, norm, pre_projection } => {
                let mut features = Vec::new();
                for f in &clip.frames {
                    features.extend(vit_forward_frame(weights, f, norm, *pre_projection)?);
                }
                (weights.arch.output_dim(*pre_projection), features)
            }
        };
        if dim == 0 || features.len() != l * dim {
            return Err(Error::Contract(format!(
                "encoder returned {} values, expected {l}×{dim}",
                features.len()
            )));
        }
        let fs = FeatureSequence::from_rows(l, dim, features, clip.video_id.clone(), self.config.encoder_id.clone())
            .map_err(|e| Error::Contract(format!("encoder output for '{}': {e}", clip.video_id)))?;
        self.check_dim(fs)
    }
}
