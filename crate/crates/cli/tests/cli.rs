//! End-to-end runs of the `decof` binary.

mod common;

use std::path::Path;

use common::*;
use decof_core::data::manifest::Split;
use decof_core::verifier::{init_params, Checkpoint, VerifierConfig};

fn small_synth(dir: &Path) {
    run_ok(&[
        "synth",
        "--out",
        p(dir),
        "--seed",
        "5",
        "--set",
        "synth.n_train=40",
        "--set",
        "synth.n_val=10",
        "--set",
        "synth.n_test=12",
        "--set",
        "synth.dim=16",
    ]);
}

fn train_small(dir: &Path, out: &Path, epochs: usize) -> String {
    run_ok(&[
        "train",
        "--manifest",
        p(&dir.join("manifest.json")),
        "--backend",
        p(&dir.join("backend.json")),
        "--config",
        p(&dir.join("train_config.json")),
        "--out",
        p(out),
        "--set",
        &format!("train.max_epochs={epochs}"),
        "--set",
        "verifier.heads=2",
    ])
}

fn stub_checkpoint(dir: &Path) -> std::path::PathBuf {
    let cfg = VerifierConfig { seq_len: 8, width: STUB_DIM, mlp_hidden: 16, heads: 2, ..Default::default() };
    let path = dir.join("stub.dcof");
    Checkpoint::new(STUB_ID, init_params(&cfg, 9).unwrap()).save(&path).unwrap();
    path
}

#[test]
fn synth_writes_corpus_and_config() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path());
    for f in ["manifest.json", "backend.json", "train_config.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("train_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["verifier"]["width"], 16);
    let features = std::fs::read_dir(dir.path().join("features")).unwrap().count();
    assert_eq!(features, 2 * (40 + 10 + 12));
}

#[test]
fn train_zero_epochs_then_eval_probe_predict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    small_synth(dir.path());
    let text = train_small(dir.path(), &out, 0);
    assert!(text.contains("0 epochs run"), "{text}");
    let ckpt = out.join("checkpoint.dcof");
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1, "header only");

    let m = dir.path().join("manifest.json");
    let b = dir.path().join("backend.json");
    let base = ["--manifest", p(&m), "--backend", p(&b), "--checkpoint", p(&ckpt), "--out", p(&out)];

    let table = run_ok(&[&["eval"], &base[..]].concat());
    assert!(table.contains("Total Avg."), "{table}");
    assert!(out.join("eval.json").is_file() && out.join("eval.txt").is_file());

    run_ok(&[&["probe"], &base[..]].concat());
    for stem in ["probe_original", "probe_probe_as_generated"] {
        assert!(out.join(format!("{stem}.json")).is_file(), "{stem}");
    }

    let pred = run_ok(&[&["predict"], &base[..]].concat());
    let lines: Vec<&str> = pred.lines().collect();
    assert_eq!(lines.len(), 24);
    for line in &lines {
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts.len(), 3, "{line}");
        let score: f64 = parts[1].parse().unwrap();
        assert_eq!(parts[1].split('.').nth(1).unwrap().len(), 6);
        let expect = if score >= 0.5 { "generated" } else { "real" };
        assert_eq!(parts[2], expect);
    }
    assert_eq!(std::fs::read_to_string(out.join("predictions.txt")).unwrap(), pred);
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train_small(dir.path(), &a, 2);
    train_small(dir.path(), &b, 2);
    for f in ["checkpoint.dcof", "curves.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path());
    let m = dir.path().join("manifest.json");
    let b = dir.path().join("backend.json");

    // Missing flag, unknown override key and malformed JSON are configuration errors.
    let o = run(&["eval", "--backend", p(&b)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: "));
    let o = run(&["train", "--manifest", p(&m), "--backend", p(&b), "--set", "train.nope=1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = run(&["train", "--manifest", p(&m), "--backend", p(&b), "--config", p(&bad)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // Missing files and contract violations are data errors.
    let o = run(&["eval", "--manifest", p(&dir.path().join("none.json")), "--backend", p(&b)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let ckpt = stub_checkpoint(dir.path());
    let o = run(&["eval", "--manifest", p(&m), "--backend", p(&b), "--checkpoint", p(&ckpt), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("contract"), "{}", stderr(&o));

    // Perturbing cached features is a capability failure.
    let out = dir.path().join("run");
    train_small(dir.path(), &out, 0);
    let o = run(&[
        "perturb",
        "--manifest",
        p(&m),
        "--backend",
        p(&b),
        "--checkpoint",
        p(&out.join("checkpoint.dcof")),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn frame_pipeline_through_stub_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let m = frame_corpus(dir.path(), 2, Split::Test);
    let b = stub_backend(dir.path());
    let ckpt = stub_checkpoint(dir.path());
    let out = dir.path().join("out");

    run_ok(&["perturb", "--manifest", p(&m), "--backend", p(&b), "--checkpoint", p(&ckpt), "--out", p(&out), "--jobs", "2"]);
    let mut reports: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("perturb_") && n.ends_with(".json"))
        .collect();
    reports.sort();
    assert_eq!(reports.len(), 9);
    assert_eq!(reports[0], "perturb_00_baseline.json");

    // Encoding to caches and evaluating from them matches evaluating frames directly.
    let caches = dir.path().join("caches");
    let first = run_ok(&["encode", "--manifest", p(&m), "--backend", p(&b), "--out", p(&caches)]);
    assert!(first.contains("encoded 6, skipped 0, failed 0"), "{first}");
    let again = run_ok(&["encode", "--manifest", p(&m), "--backend", p(&b), "--out", p(&caches)]);
    assert!(again.contains("encoded 0, skipped 6"), "{again}");
    let cb = cache_backend(dir.path(), &caches, STUB_ID);
    let (e1, e2) = (dir.path().join("e1"), dir.path().join("e2"));
    run_ok(&["eval", "--manifest", p(&m), "--backend", p(&b), "--checkpoint", p(&ckpt), "--out", p(&e1)]);
    run_ok(&["eval", "--manifest", p(&m), "--backend", p(&cb), "--checkpoint", p(&ckpt), "--out", p(&e2)]);
    let rows = |d: &Path| {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
        v["rows"].clone()
    };
    assert_eq!(rows(&e1), rows(&e2));

    // Scoring folders directly gives the manifest-driven scores.
    let listed = run_ok(&["predict", "--backend", p(&b), "--checkpoint", p(&ckpt), "--manifest", p(&m)]);
    let direct = run_ok(&[
        "predict",
        "--backend",
        p(&b),
        "--checkpoint",
        p(&ckpt),
        p(&dir.path().join("real-0")),
        p(&dir.path().join("g2-1")),
    ]);
    for line in direct.lines() {
        assert!(listed.lines().any(|l| l == line), "{line}");
    }

    run_ok(&["spectrum", "--manifest", p(&m), "--out", p(&out)]);
    for g in ["real", "g1", "g2"] {
        assert!(out.join(format!("spectrum_{g}.pgm")).is_file(), "{g}");
    }
}

#[test]
fn export_features_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = frame_corpus(dir.path(), 1, Split::Test);
    let b = stub_backend(dir.path());
    let ckpt = stub_checkpoint(dir.path());
    let csv = dir.path().join("features.csv");
    run_ok(&[
        "eval",
        "--manifest",
        p(&m),
        "--backend",
        p(&b),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(dir.path()),
        "--export-features",
        p(&csv),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["video_id", "frame_index", "label", "generator"]);
    assert_eq!(header.len(), 4 + STUB_DIM);
    assert_eq!(lines.count(), 3 * 8);
}
