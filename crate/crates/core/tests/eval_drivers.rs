//! Experiment drivers on synthetic feature corpora and on tiny frame folders
//! encoded through the stub external encoder.

use std::path::Path;

use decof_core::data::clip::Frame;
use decof_core::data::frames::save_frame;
use decof_core::data::manifest::{load_manifest, DatasetManifest, ManifestEntry, Split};
use decof_core::data::perturb::{default_perturbations, PerturbationSpec};
use decof_core::data::synth::{write_synth_corpus, SynthCorpusConfig, SYNTH_BACKEND};
use decof_core::encoder::{Backend, EncoderBackendConfig};
use decof_core::eval::{
    eval_cross_generator, probe_eval, robustness_sweep, test_spectra, Condition, FeatureSource, ProbeLabels,
    Scored, VerifierScorer, VideoScorer,
};
use decof_core::verifier::{init_params, Checkpoint, VerifierConfig};
use decof_core::{Error, FeatureSequence, Label, Result};

struct FnScorer<F>(F, Option<&'static str>);

impl<F: Fn(&FeatureSequence) -> f64 + Sync> VideoScorer for FnScorer<F> {
    fn id(&self) -> String {
        "stub".into()
    }
    fn encoder_id(&self) -> Option<&str> {
        self.1
    }
    fn score(&self, seq: &FeatureSequence) -> Result<f64> {
        Ok((self.0)(seq))
    }
}

fn synth_corpus(dir: &Path, n_test: usize) -> (DatasetManifest, Backend) {
    let cfg = SynthCorpusConfig { n_train: 0, n_val: 0, n_test, dim: 16, seed: 11, ..Default::default() };
    let m = write_synth_corpus(dir, &cfg).unwrap();
    let b = Backend::from_config(EncoderBackendConfig::load(&dir.join(SYNTH_BACKEND)).unwrap()).unwrap();
    (m, b)
}

/// Pairwise-count AP: for each positive, precision among items ranked at or
/// above it (higher score, or equal score and smaller-or-equal id).
fn ap_oracle(set: &[Scored]) -> f64 {
    let at_or_above = |a: &Scored, p: &Scored| a.score > p.score || (a.score == p.score && a.video_id <= p.video_id);
    let pos: Vec<&Scored> = set.iter().filter(|s| s.label.is_generated()).collect();
    pos.iter()
        .map(|p| {
            let above: Vec<&Scored> = set.iter().filter(|a| at_or_above(a, p)).collect();
            above.iter().filter(|a| a.label.is_generated()).count() as f64 / above.len() as f64
        })
        .sum::<f64>()
        / pos.len() as f64
}

#[test]
fn constant_scores_follow_tie_rules() {
    let dir = tempfile::tempdir().unwrap();
    let (m, b) = synth_corpus(dir.path(), 15);
    let source = FeatureSource::new(&m, &b);
    let r = eval_cross_generator(&FnScorer(|_: &FeatureSequence| 0.5, None), &source, &Condition::default(), 1).unwrap();
    assert_eq!(r.rows.len(), 1);
    let row = &r.rows[0];
    assert_eq!(row.acc, 0.5);
    let set: Vec<Scored> = m
        .split(Split::Test)
        .map(|e| Scored::new(0.5, e.label, e.video_id.clone()))
        .collect();
    assert!((row.ap - ap_oracle(&set)).abs() < 1e-12);
    assert_eq!((r.total_avg.acc, r.total_avg.ap), (row.acc, row.ap));
    assert_eq!(r.provenance.manifest, m.content_hash);
}

#[test]
fn reports_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (m, b) = synth_corpus(dir.path(), 40);
    let cfg = VerifierConfig { width: 16, layers: 1, heads: 2, mlp_hidden: 16, ..Default::default() };
    let scorer = VerifierScorer::new(Checkpoint::new("synthetic", init_params(&cfg, 3).unwrap())).unwrap();
    let source = FeatureSource::new(&m, &b);
    let one = eval_cross_generator(&scorer, &source, &Condition::default(), 1).unwrap();
    let eight = eval_cross_generator(&scorer, &source, &Condition::default(), 8).unwrap();
    assert_eq!(one.to_json().unwrap(), eight.to_json().unwrap());
    let p1 = probe_eval(&scorer, &source, 1).unwrap();
    let p8 = probe_eval(&scorer, &source, 8).unwrap();
    assert_eq!(p1[1].to_json().unwrap(), p8[1].to_json().unwrap());

    let other = VerifierScorer::new(Checkpoint::new("other-encoder", init_params(&cfg, 3).unwrap())).unwrap();
    assert!(matches!(
        eval_cross_generator(&other, &source, &Condition::default(), 1),
        Err(Error::Contract(_))
    ));
}

#[test]
fn cache_backend_cannot_perturb() {
    let dir = tempfile::tempdir().unwrap();
    let (m, b) = synth_corpus(dir.path(), 2);
    let source = FeatureSource::new(&m, &b);
    let e = robustness_sweep(&FnScorer(|_: &FeatureSequence| 0.3, None), &source, &default_perturbations(), 1)
        .unwrap_err();
    assert!(e.to_string().contains("jpeg") || e.to_string().contains("blur"), "{e}");
}

fn consecutive_distance_variance(seq: &FeatureSequence) -> f64 {
    let d: Vec<f64> = (1..seq.len())
        .map(|t| 1.0 - seq.row(t - 1).iter().zip(seq.row(t)).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>())
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64
}

#[test]
fn temporal_probe_with_consistency_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let (m, b) = synth_corpus(dir.path(), 300);
    let source = FeatureSource::new(&m, &b);
    let scorer = FnScorer(
        |s: &FeatureSequence| {
            let v = consecutive_distance_variance(s);
            v / (v + 1e-6)
        },
        None,
    );
    let baseline = eval_cross_generator(&scorer, &source, &Condition::default(), 4).unwrap();
    assert!(baseline.rows[0].acc > 0.99, "{:?}", baseline.rows[0]);
    let reports = probe_eval(&scorer, &source, 4).unwrap();
    let as_gen = reports.iter().find(|r| r.labels == ProbeLabels::ProbeAsGenerated).unwrap();
    assert!(as_gen.temporal.rows[0].acc > 0.95, "{:?}", as_gen.temporal.rows[0]);
    // Scrambled reals look generated, so keeping their labels collapses accuracy.
    let orig = reports.iter().find(|r| r.labels == ProbeLabels::Original).unwrap();
    assert!(orig.temporal.rows[0].acc < 0.6, "{:?}", orig.temporal.rows[0]);
    assert_eq!(orig.temporal.provenance.probe.as_ref().unwrap().condition, "temporal");
    let d = &orig.difference[0];
    assert!((d.acc - (orig.spatial.rows[0].acc - orig.temporal.rows[0].acc)).abs() < 1e-15);
    assert_eq!(orig.difference.last().unwrap().generator, "Total Avg.");
}

#[test]
fn temporal_probe_leaves_order_blind_scorer_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let (m, b) = synth_corpus(dir.path(), 100);
    let source = FeatureSource::new(&m, &b);
    // Depends only on the multiset of rows, through a fixed direction.
    let scorer = FnScorer(
        |s: &FeatureSequence| {
            let mut proj: Vec<f64> =
                (0..s.len()).map(|t| s.row(t).iter().enumerate().map(|(k, &v)| v as f64 * ((k % 3) as f64 - 1.0)).sum()).collect();
            proj.sort_by(|a, b| a.partial_cmp(b).unwrap());
            1.0 / (1.0 + (-proj.iter().sum::<f64>()).exp())
        },
        None,
    );
    let baseline = eval_cross_generator(&scorer, &source, &Condition::default(), 1).unwrap();
    let orig = probe_eval(&scorer, &source, 1).unwrap().remove(0);
    assert_eq!(orig.labels, ProbeLabels::Original);
    assert_eq!(orig.temporal.rows[0].acc, baseline.rows[0].acc);
    assert_eq!(orig.temporal.rows[0].ap, baseline.rows[0].ap);
}

// ---------------------------------------------------------------------------
// Frame folders through the stub encoder process.
// ---------------------------------------------------------------------------

fn write_video(dir: &Path, frames: usize, phase: f32, flicker: bool) {
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

fn frame_corpus(dir: &Path) -> DatasetManifest {
    let mut entries = Vec::new();
    for i in 0..3 {
        for (label, gen) in [(Label::Real, None), (Label::Generated, Some("g1")), (Label::Generated, Some("g2"))] {
            let id = format!("{}-{i}", gen.unwrap_or("real"));
            write_video(&dir.join(&id), 4 + i, i as f32, gen == Some("g2"));
            entries.push(ManifestEntry {
                video_id: id.clone(),
                frames_dir: id.into(),
                label,
                generator: gen.map(String::from),
                prompt_id: format!("p{i}"),
                split: Split::Test,
                source: None,
            });
        }
    }
    let m = DatasetManifest::new(vec!["g1".into(), "g2".into()], entries);
    std::fs::write(dir.join("manifest.json"), m.to_json().unwrap()).unwrap();
    load_manifest(&dir.join("manifest.json")).unwrap()
}

fn stub_backend() -> Backend {
    let argv = vec![
        env!("CARGO_BIN_EXE_decof-stub-encoder").to_string(),
        "--dim".into(),
        "12".into(),
    ];
    Backend::from_config(EncoderBackendConfig::external(argv, "stub-12")).unwrap()
}

fn feature_scorer() -> FnScorer<impl Fn(&FeatureSequence) -> f64 + Sync> {
    FnScorer(
        |s: &FeatureSequence| {
            let v = consecutive_distance_variance(s);
            v / (v + 1e-7)
        },
        Some("stub-12"),
    )
}

#[test]
fn robustness_sweep_on_frames() {
    let dir = tempfile::tempdir().unwrap();
    let m = frame_corpus(dir.path());
    let backend = stub_backend();
    let source = FeatureSource::new(&m, &backend);
    let scorer = feature_scorer();
    let reports = robustness_sweep(&scorer, &source, &default_perturbations(), 2).unwrap();
    assert_eq!(reports.len(), 9);
    assert_eq!(reports[0].condition, "baseline");
    assert_eq!(reports[0].provenance.perturbation, None);
    for (r, spec) in reports[1..].iter().zip(default_perturbations()) {
        assert_eq!(r.provenance.perturbation, Some(spec));
        assert_eq!(r.rows.len(), 2);
    }
    let plain = eval_cross_generator(&scorer, &source, &Condition::default(), 1).unwrap();
    let identity = robustness_sweep(&scorer, &source, &[], 3).unwrap();
    assert_eq!(identity, vec![plain.clone()]);
    assert_eq!(reports[0], plain);
    let bad = robustness_sweep(&scorer, &source, &[PerturbationSpec::Jpeg { quality: 0 }], 1);
    assert!(matches!(bad, Err(Error::Parameter(_))));
}

#[test]
fn frame_and_feature_probes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = frame_corpus(dir.path());
    let backend = stub_backend();
    let scorer = feature_scorer();
    let from_frames = probe_eval(&scorer, &FeatureSource::new(&m, &backend), 1).unwrap();

    // Same videos through a cache: probes then act on feature rows.
    let cache_dir = dir.path().join("cache");
    let source = FeatureSource::new(&m, &backend);
    for e in &m.entries {
        let fs = source.sequence(e, &Condition::default()).unwrap();
        decof_core::encoder::write_feature_cache(&fs, &cache_dir).unwrap();
    }
    let cache = Backend::from_config(EncoderBackendConfig::cache(&cache_dir, "stub-12")).unwrap();
    let from_cache = probe_eval(&scorer, &FeatureSource::new(&m, &cache), 1).unwrap();
    assert_eq!(from_frames, from_cache);
}

#[test]
fn spectra_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let m = frame_corpus(dir.path());
    let grids = test_spectra(&m, 8, 1).unwrap();
    assert_eq!(grids.iter().map(|g| g.source.as_str()).collect::<Vec<_>>(), ["real", "g1", "g2"]);
    assert!(grids.iter().all(|g| g.count == 24 && g.height == 224));
    assert_eq!(test_spectra(&m, 8, 4).unwrap(), grids);
    // Linearity: the pooled mean is the count-weighted mean of group means.
    let mut pooled = grids[1].clone();
    pooled.merge(&grids[2]).unwrap();
    let (a, b, p) = (grids[1].mean().unwrap(), grids[2].mean().unwrap(), pooled.mean().unwrap());
    for i in (0..p.len()).step_by(997) {
        assert!((p[i] - (a[i] * 24.0 + b[i] * 24.0) / 48.0).abs() < 1e-12);
    }
}
