//! Frame folders (`<frames_dir>/000001.png`, …) and frame sampling.

use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};

use super::clip::{ClipTensor, Frame, Stage};

pub const DEFAULT_SEQ_LEN: usize = 8;

/// `L` evenly spaced indices into `n` frames: `floor(i·n/L)`. Indices repeat
/// when `n < L`.
pub fn sample_frames(n: usize, l: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Data("cannot sample from a video with zero frames".into()));
    }
    if l == 0 {
        return Err(Error::Config("sample length must be ≥ 1".into()));
    }
    Ok((0..l).map(|i| i * n / l).collect())
}

fn frame_number(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if !matches!(ext.as_str(), "png" | "jpg" | "jpeg") {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

/// Numbered image files in `dir`, in frame order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some(n) = frame_number(&path) {
            files.push((n, path));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
    Ok(Frame::from_rgb8(&img.to_rgb8()))
}

/// Loads the `seq_len` sampled frames of one video as a raw clip.
pub fn load_clip(dir: &Path, video_id: &str, seq_len: usize) -> Result<ClipTensor> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no numbered frames in {} for video '{video_id}'",
            dir.display()
        )));
    }
    let idx = sample_frames(files.len(), seq_len)?;
    let mut frames = Vec::with_capacity(seq_len);
    let mut cache: Option<(usize, Frame)> = None;
    for i in idx {
        let frame = match &cache {
            Some((j, f)) if *j == i => f.clone(),
            _ => load_frame(&files[i])?,
        };
        cache = Some((i, frame.clone()));
        frames.push(frame);
    }
    ClipTensor::new(frames, video_id, Stage::Raw)
}

/// Saves a raw frame as PNG.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let img = image::RgbImage::from_raw(frame.width as u32, frame.height as u32, frame.to_u8())
        .ok_or_else(|| Error::Dimension("frame buffer does not match its size".into()))?;
    img.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// Runs a configured decoder command with `{input}` and `{outdir}` substituted
/// in each argument. `outdir` is created first.
pub fn run_decoder_hook(template: &[String], input: &Path, outdir: &Path) -> Result<()> {
    let (program, args) = template
        .split_first()
        .ok_or_else(|| Error::Config("decoder command is empty".into()))?;
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let subst = |s: &str| {
        s.replace("{input}", &input.to_string_lossy())
            .replace("{outdir}", &outdir.to_string_lossy())
    };
    let status = Command::new(subst(program))
        .args(args.iter().map(|a| subst(a)))
        .status()
        .map_err(|e| Error::Backend(format!("failed to start decoder '{program}': {e}")))?;
    if !status.success() {
        return Err(Error::Data(format!(
            "decoder exited with {status} for input {}",
            input.display()
        )));
    }
    Ok(())
}
