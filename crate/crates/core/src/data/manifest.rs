//! Dataset manifests: (real video, prompt, generated videos) triples with
//! prompt-disjoint train/val/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub frames_dir: PathBuf,
    pub label: Label,
    #[serde(default)]
    pub generator: Option<String>,
    pub prompt_id: String,
    pub split: Split,
    /// Source video for the optional decoder hook.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub generators: Vec<String>,
    /// Corpora that exist only as feature caches (no frame folders).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub feature_only: bool,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative `frames_dir` paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// SHA-256 of the manifest file, hex.
    #[serde(skip)]
    pub content_hash: String,
}

impl DatasetManifest {
    pub fn new(generators: Vec<String>, entries: Vec<ManifestEntry>) -> Self {
        DatasetManifest {
            generators,
            feature_only: false,
            entries,
            base_dir: PathBuf::from("."),
            content_hash: String::new(),
        }
    }

    /// Parses without validating.
    pub fn parse(bytes: &[u8], base_dir: &Path) -> Result<Self> {
        let mut m: DatasetManifest = serde_json::from_slice(bytes)?;
        m.base_dir = base_dir.to_path_buf();
        m.content_hash = hex::encode(Sha256::digest(bytes));
        Ok(m)
    }

    pub fn frames_dir(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.frames_dir.is_absolute() {
            entry.frames_dir.clone()
        } else {
            self.base_dir.join(&entry.frames_dir)
        }
    }

    /// Every rule violation, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.video_id.as_str()) {
                out.push(format!("duplicate video_id '{}'", e.video_id));
            }
        }
        let known: BTreeSet<&str> = self.generators.iter().map(String::as_str).collect();
        for e in &self.entries {
            match (&e.label, &e.generator) {
                (Label::Generated, None) => {
                    out.push(format!("generated video '{}' has no generator", e.video_id))
                }
                (Label::Generated, Some(g)) if !known.is_empty() && !known.contains(g.as_str()) => {
                    out.push(format!("video '{}' names unknown generator '{g}'", e.video_id))
                }
                _ => {}
            }
        }
        let mut splits: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        for e in &self.entries {
            splits.entry(&e.prompt_id).or_default().insert(e.split);
        }
        for (prompt, s) in &splits {
            if s.len() > 1 {
                let names: Vec<&str> = s.iter().map(|x| x.as_str()).collect();
                out.push(format!("prompt_id '{prompt}' appears in splits {}", names.join(", ")));
            }
        }
        if !self.feature_only {
            for e in &self.entries {
                let dir = self.frames_dir(e);
                if !dir.is_dir() {
                    out.push(format!(
                        "frames_dir {} for video '{}' does not exist",
                        dir.display(),
                        e.video_id
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            if self.entries.is_empty() {
                warn!("manifest has no entries");
            }
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Generator names in declaration order, plus any only seen in entries.
    pub fn generator_names(&self) -> Vec<String> {
        let mut names = self.generators.clone();
        for e in &self.entries {
            if let Some(g) = &e.generator {
                if e.label.is_generated() && !names.contains(g) {
                    names.push(g.clone());
                }
            }
        }
        names
    }

    /// Real videos of `split` plus the fakes of one generator.
    pub fn generator_subset(&self, split: Split, generator: &str) -> Vec<&ManifestEntry> {
        self.split(split)
            .filter(|e| match e.label {
                Label::Real => true,
                Label::Generated => e.generator.as_deref() == Some(generator),
            })
            .collect()
    }

    /// Sub-dataset of one generator: all reals plus that generator's fakes.
    pub fn restrict_to_generator(&self, generator: &str) -> Result<DatasetManifest> {
        if !self.generator_names().iter().any(|g| g == generator) {
            return Err(Error::Data(format!("manifest has no generator '{generator}'")));
        }
        let mut m = self.clone();
        m.generators = vec![generator.to_string()];
        m.entries.retain(|e| e.label == Label::Real || e.generator.as_deref() == Some(generator));
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }
}

/// Reads, parses and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let m = load_manifest_unchecked(path)?;
    m.validate()?;
    Ok(m)
}

pub fn load_manifest_unchecked(path: &Path) -> Result<DatasetManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    DatasetManifest::parse(&bytes, &base).map_err(|e| e.context(format!("manifest {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, label: Label, gen: Option<&str>, prompt: &str, split: Split) -> ManifestEntry {
        ManifestEntry {
            video_id: id.into(),
            frames_dir: PathBuf::from(id),
            label,
            generator: gen.map(String::from),
            prompt_id: prompt.into(),
            split,
            source: None,
        }
    }

    fn feature_only(entries: Vec<ManifestEntry>) -> DatasetManifest {
        let mut m = DatasetManifest::new(vec!["g1".into(), "g2".into()], entries);
        m.feature_only = true;
        m
    }

    #[test]
    fn gvf_sized_splits_accepted() {
        let mut entries = Vec::new();
        for (split, n) in [(Split::Train, 771), (Split::Val, 97), (Split::Test, 96)] {
            for i in 0..n {
                let p = format!("{}-{i}", split.as_str());
                entries.push(entry(&format!("real-{p}"), Label::Real, None, &p, split));
                for g in ["g1", "g2"] {
                    entries.push(entry(&format!("{g}-{p}"), Label::Generated, Some(g), &p, split));
                }
            }
        }
        let m = feature_only(entries);
        m.validate().unwrap();
        assert_eq!(m.split(Split::Train).count(), 771 * 3);
        assert_eq!(m.generator_subset(Split::Test, "g1").len(), 96 * 2);
        let sub = m.restrict_to_generator("g2").unwrap();
        assert_eq!(sub.entries.len(), 964 * 2);
    }

    #[test]
    fn prompt_leakage_names_prompt() {
        let m = feature_only(vec![
            entry("a", Label::Real, None, "p7", Split::Train),
            entry("b", Label::Generated, Some("g1"), "p7", Split::Test),
        ]);
        match m.validate() {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].contains("p7"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_violations_enumerated() {
        let m = feature_only(vec![
            entry("a", Label::Real, None, "p1", Split::Train),
            entry("a", Label::Real, None, "p2", Split::Train),
            entry("b", Label::Generated, None, "p3", Split::Train),
            entry("c", Label::Generated, Some("zz"), "p4", Split::Train),
        ]);
        let v = m.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v[0].contains("duplicate video_id 'a'"));
    }

    #[test]
    fn empty_manifest_accepted() {
        let m = DatasetManifest::parse(br#"{"entries": []}"#, Path::new(".")).unwrap();
        m.validate().unwrap();
        assert!(m.entries.is_empty());
    }

    #[test]
    fn missing_frames_dir_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("a")).unwrap();
        let json = r#"{"generators": ["g1"], "entries": [
            {"video_id": "a", "frames_dir": "a", "label": "real", "prompt_id": "p", "split": "test"},
            {"video_id": "b", "frames_dir": "b", "label": "generated", "generator": "g1", "prompt_id": "p", "split": "test"}
        ]}"#;
        let path = dir.path().join("m.json");
        std::fs::write(&path, json).unwrap();
        let e = load_manifest(&path).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("'b'") && !msg.contains("'a'"), "{msg}");
        let m = load_manifest_unchecked(&path).unwrap();
        assert_eq!(m.content_hash.len(), 64);
    }
}
