#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use decof_core::data::clip::Frame;
use decof_core::data::frames::save_frame;
use decof_core::data::manifest::{DatasetManifest, ManifestEntry, Split};
use decof_core::encoder::EncoderBackendConfig;
use decof_core::Label;

pub const STUB_ID: &str = "stub-12";
pub const STUB_DIM: usize = 12;

pub fn decof() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_decof"));
    cmd.env("DECOF_LOG", "error");
    cmd
}

/// Runs `decof` with the given arguments.
pub fn run(args: &[&str]) -> Output {
    decof().args(args).output().expect("spawn decof")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
pub fn run_ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "decof {args:?} failed: {}", stderr(&o));
    stdout(&o)
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Smooth frames with a per-video phase; `flicker` brightens odd frames.
pub fn write_video(dir: &Path, frames: usize, phase: f32, flicker: bool) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..frames {
        let shift = if flicker && i % 2 == 1 { 0.4 } else { 0.0 };
        let f = Frame::from_fn(24, 30, |y, x, c| {
            let v = 0.5 + 0.3 * ((x as f32 * 0.3 + y as f32 * 0.2 + phase + c as f32 + i as f32 * 0.05).sin()) + shift;
            255.0 * v.clamp(0.0, 1.0)
        })
        .quantized();
        save_frame(&f, &dir.join(format!("{:06}.png", i + 1))).unwrap();
    }
}

/// Real, g1 and g2 videos in the given split, plus `manifest.json`.
pub fn frame_corpus(dir: &Path, per_group: usize, split: Split) -> PathBuf {
    let mut entries = Vec::new();
    for i in 0..per_group {
        for (label, gen) in [(Label::Real, None), (Label::Generated, Some("g1")), (Label::Generated, Some("g2"))] {
            let id = format!("{}-{i}", gen.unwrap_or("real"));
            write_video(&dir.join(&id), 4 + i % 3, i as f32, gen == Some("g2"));
            entries.push(ManifestEntry {
                video_id: id.clone(),
                frames_dir: id.into(),
                label,
                generator: gen.map(String::from),
                prompt_id: format!("p{i}"),
                split,
                source: None,
            });
        }
    }
    let m = DatasetManifest::new(vec!["g1".into(), "g2".into()], entries);
    let path = dir.join("manifest.json");
    std::fs::write(&path, m.to_json().unwrap()).unwrap();
    path
}

/// External backend config that runs `decof stub-encoder`.
pub fn stub_backend(dir: &Path) -> PathBuf {
    let argv = vec![
        env!("CARGO_BIN_EXE_decof").to_string(),
        "stub-encoder".into(),
        "--dim".into(),
        STUB_DIM.to_string(),
    ];
    let cfg = EncoderBackendConfig::external(argv, STUB_ID);
    let path = dir.join("stub_backend.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn cache_backend(dir: &Path, cache_dir: &Path, encoder_id: &str) -> PathBuf {
    let cfg = EncoderBackendConfig::cache(cache_dir, encoder_id);
    let path = dir.join("cache_backend.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}
