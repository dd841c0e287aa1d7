//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use decof_core::data::frames::load_clip;
use decof_core::data::manifest::{load_manifest, DatasetManifest, ManifestEntry, Split};
use decof_core::data::perturb::{default_perturbations, PerturbationSpec};
use decof_core::data::preprocess::preprocess_eval;
use decof_core::data::synth::{write_synth_corpus, SynthCorpusConfig, SYNTH_BACKEND, SYNTH_MANIFEST};
use decof_core::data::DEFAULT_SEQ_LEN;
use decof_core::encoder::cache::{cache_path, load_feature_cache, write_feature_cache};
use decof_core::encoder::{stub, Backend, EncoderBackendConfig};
use decof_core::eval::{
    eval_cross_generator, export_features_csv, par_map, probe_eval, robustness_sweep, test_spectra, Condition,
    FeatureRecord, FeatureSource, VerifierScorer, VideoScorer, DEFAULT_THRESHOLD,
};
use decof_core::verifier::{
    score_examples, train_verifier, write_curves_csv, Checkpoint, Example, TrainConfig, VerifierConfig,
};
use decof_core::{Error, FeatureSequence, Label, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::overrides::{apply_overrides, check_sections};
use crate::{Cli, Command, GlobalArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.dcof";
pub const CURVES_FILE: &str = "curves.csv";
pub const TRAIN_CONFIG_FILE: &str = "train_config.json";

/// Training run configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub verifier: VerifierConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EncodeConfig {
    seq_len: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig { seq_len: DEFAULT_SEQ_LEN }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if g.jobs == 0 {
        return Err(Error::Config("--jobs must be ≥ 1".into()));
    }
    let name = format!("{:?}", cli.command).split([' ', '{']).next().unwrap_or_default().to_lowercase();
    let result = match &cli.command {
        Command::Encode => cmd_encode(g),
        Command::Train { config, generator } => cmd_train(g, config.as_deref(), generator.as_deref()),
        Command::Eval { export_features } => cmd_eval(g, export_features.as_deref()),
        Command::Probe => cmd_probe(g),
        Command::Perturb { specs } => cmd_perturb(g, specs.as_deref()),
        Command::Spectrum => cmd_spectrum(g),
        Command::Predict { split, dirs } => cmd_predict(g, split, dirs),
        Command::Synth => cmd_synth(g),
        Command::StubEncoder { dim } => cmd_stub_encoder(g, *dim),
    };
    result.map_err(|e| e.context(name))
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Config(format!("{flag} is required")))
}

fn out_dir(g: &GlobalArgs) -> Result<&Path> {
    let dir = require(&g.out, "--out")?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn manifest(g: &GlobalArgs) -> Result<DatasetManifest> {
    load_manifest(require(&g.manifest, "--manifest")?)
}

fn backend(g: &GlobalArgs) -> Result<Backend> {
    let path = require(&g.backend, "--backend")?;
    Backend::from_config(EncoderBackendConfig::load(path)?)
}

fn scorer(g: &GlobalArgs) -> Result<VerifierScorer> {
    VerifierScorer::load(require(&g.checkpoint, "--checkpoint")?)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn modified(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

enum EncodeOutcome {
    Written,
    Skipped,
    Failed(String),
}

fn cmd_encode(g: &GlobalArgs) -> Result<()> {
    check_sections(&g.overrides, &["encode"])?;
    let cfg = apply_overrides(&EncodeConfig::default(), "encode", &g.overrides)?;
    let m = manifest(g)?;
    let b = backend(g)?;
    let out = out_dir(g)?;
    if !b.encodes_pixels() {
        return Err(Error::Config("encode needs an external or native backend, not a feature cache".into()));
    }
    if m.entries.is_empty() {
        warn!("manifest has no entries; nothing to encode");
        println!("encoded 0, skipped 0, failed 0");
        return Ok(());
    }
    let source = FeatureSource { seq_len: cfg.seq_len, ..FeatureSource::new(&m, &b) };
    let entries: Vec<&ManifestEntry> = m.entries.iter().collect();
    let outcomes = par_map(g.jobs, &entries, |e| {
        let target = cache_path(out, &e.video_id);
        if is_up_to_date(&target, &m.frames_dir(e), b.encoder_id(), cfg.seq_len) {
            return Ok(EncodeOutcome::Skipped);
        }
        let written = source
            .sequence(e, &Condition::default())
            .and_then(|fs| write_feature_cache(&fs, out));
        Ok(match written {
            Ok(_) => EncodeOutcome::Written,
            Err(err) => EncodeOutcome::Failed(err.to_string()),
        })
    })?;
    let (mut written, mut skipped, mut failed) = (0, 0, Vec::new());
    for o in outcomes {
        match o {
            EncodeOutcome::Written => written += 1,
            EncodeOutcome::Skipped => skipped += 1,
            EncodeOutcome::Failed(msg) => failed.push(msg),
        }
    }
    println!("encoded {written}, skipped {skipped}, failed {}", failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        for msg in &failed {
            eprintln!("  {msg}");
        }
        Err(Error::Data(format!("{} of {} videos failed to encode", failed.len(), entries.len())))
    }
}

fn is_up_to_date(cache: &Path, frames: &Path, encoder_id: &str, seq_len: usize) -> bool {
    let (Some(c), Some(f)) = (modified(cache), modified(frames)) else {
        return false;
    };
    c >= f && load_feature_cache(cache).is_ok_and(|fs| fs.encoder_id == encoder_id && fs.len() == seq_len)
}

#[derive(Serialize)]
struct TrainSummary {
    encoder_id: String,
    best_epoch: Option<usize>,
    epochs_run: usize,
    val_acc: f64,
    val_ap: f64,
    checkpoint_sha256: String,
    config: RunConfig,
}

fn load_examples(source: &FeatureSource<'_>, split: Split, jobs: usize, train: bool) -> Result<Vec<Example>> {
    let entries: Vec<&ManifestEntry> = source.manifest.split(split).collect();
    par_map(jobs, &entries, |e| {
        let seq = if train { source.train_sequence(e)? } else { source.sequence(e, &Condition::default())? };
        Ok(Example::new(seq, e.label))
    })
}

fn cmd_train(g: &GlobalArgs, config: Option<&Path>, generator: Option<&str>) -> Result<()> {
    check_sections(&g.overrides, &["verifier", "train"])?;
    let mut run = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    run.train.seed = g.seed;
    run.verifier = apply_overrides(&run.verifier, "verifier", &g.overrides)?;
    run.train = apply_overrides(&run.train, "train", &g.overrides)?;
    run.verifier.validate()?;
    run.train.validate()?;

    let mut m = manifest(g)?;
    if let Some(gen) = generator {
        m = m.restrict_to_generator(gen)?;
    }
    let b = backend(g)?;
    let out = out_dir(g)?;
    let source = FeatureSource { seq_len: run.verifier.seq_len, seed: g.seed, ..FeatureSource::new(&m, &b) };
    let train = load_examples(&source, Split::Train, g.jobs, true)?;
    let val = load_examples(&source, Split::Val, g.jobs, false)?;
    info!("training on {} videos, validating on {}", train.len(), val.len());
    let outcome = train_verifier(&train, &val, &run.verifier, &run.train)?;

    let checkpoint = Checkpoint::new(b.encoder_id(), outcome.params);
    let bytes = checkpoint.to_bytes()?;
    write_file(&out.join(CHECKPOINT_FILE), &bytes)?;
    write_curves_csv(&outcome.curves, &out.join(CURVES_FILE))?;
    let scored = score_examples(&val, &checkpoint.params)?;
    let val_acc = decof_core::eval::accuracy(&scored, DEFAULT_THRESHOLD)?;
    let val_ap = decof_core::eval::average_precision(&scored)?;
    let summary = TrainSummary {
        encoder_id: checkpoint.encoder_id.clone(),
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.curves.len(),
        val_acc,
        val_ap,
        checkpoint_sha256: hex::encode(Sha256::digest(&bytes)),
        config: run,
    };
    write_file(&out.join("train_summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "val ACC {:.2}% AP {:.2}% (best epoch {}, {} epochs run)",
        val_acc * 100.0,
        val_ap * 100.0,
        outcome.best_epoch.map_or("-".to_string(), |e| e.to_string()),
        outcome.curves.len()
    );
    println!("checkpoint {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn eval_source<'a>(g: &GlobalArgs, m: &'a DatasetManifest, b: &'a Backend, s: &VerifierScorer) -> FeatureSource<'a> {
    FeatureSource { seq_len: s.checkpoint.config().seq_len, seed: g.seed, ..FeatureSource::new(m, b) }
}

fn no_overrides(g: &GlobalArgs) -> Result<()> {
    match g.overrides.first() {
        Some(s) => Err(Error::Config(format!("this subcommand takes no overrides (got '{s}')"))),
        None => Ok(()),
    }
}

fn cmd_eval(g: &GlobalArgs, export: Option<&Path>) -> Result<()> {
    no_overrides(g)?;
    let (m, b, s) = (manifest(g)?, backend(g)?, scorer(g)?);
    let out = out_dir(g)?;
    let source = eval_source(g, &m, &b, &s);
    let report = eval_cross_generator(&s, &source, &Condition::default(), g.jobs)?;
    report.write(out, "eval")?;
    print!("{}", report.to_table());
    if let Some(path) = export {
        let entries: Vec<&ManifestEntry> = m.split(Split::Test).collect();
        let seqs: Vec<FeatureSequence> = par_map(g.jobs, &entries, |e| source.sequence(e, &Condition::default()))?;
        let records: Vec<FeatureRecord<'_>> = entries
            .iter()
            .zip(&seqs)
            .map(|(e, seq)| FeatureRecord { seq, label: e.label, generator: e.generator.as_deref() })
            .collect();
        let rows = export_features_csv(&records, path)?;
        info!("wrote {rows} feature rows to {}", path.display());
    }
    Ok(())
}

fn cmd_probe(g: &GlobalArgs) -> Result<()> {
    no_overrides(g)?;
    let (m, b, s) = (manifest(g)?, backend(g)?, scorer(g)?);
    let out = out_dir(g)?;
    let reports = probe_eval(&s, &eval_source(g, &m, &b, &s), g.jobs)?;
    for r in &reports {
        r.write(out, &format!("probe_{}", r.labels.as_str()))?;
        println!("{}", r.to_table());
    }
    Ok(())
}

fn cmd_perturb(g: &GlobalArgs, specs: Option<&Path>) -> Result<()> {
    no_overrides(g)?;
    let specs: Vec<PerturbationSpec> = match specs {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => default_perturbations(),
    };
    let (m, b, s) = (manifest(g)?, backend(g)?, scorer(g)?);
    let out = out_dir(g)?;
    let reports = robustness_sweep(&s, &eval_source(g, &m, &b, &s), &specs, g.jobs)?;
    println!("{:<16}  {:>8}  {:>8}", "condition", "ACC(%)", "AP(%)");
    for (i, r) in reports.iter().enumerate() {
        r.write(out, &format!("perturb_{i:02}_{}", r.condition))?;
        println!("{:<16}  {:>8.2}  {:>8.2}", r.condition, r.total_avg.acc * 100.0, r.total_avg.ap * 100.0);
    }
    Ok(())
}

fn cmd_spectrum(g: &GlobalArgs) -> Result<()> {
    no_overrides(g)?;
    let m = manifest(g)?;
    let out = out_dir(g)?;
    for grid in test_spectra(&m, DEFAULT_SEQ_LEN, g.jobs)? {
        let stem: String = grid
            .source
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        grid.export(out, &format!("spectrum_{stem}"))?;
        println!("{}: {} frames", grid.source, grid.count);
    }
    Ok(())
}

fn verdict(score: f64) -> &'static str {
    if score >= DEFAULT_THRESHOLD {
        Label::Generated.as_str()
    } else {
        Label::Real.as_str()
    }
}

fn cmd_predict(g: &GlobalArgs, split: &str, dirs: &[PathBuf]) -> Result<()> {
    no_overrides(g)?;
    let (b, s) = (backend(g)?, scorer(g)?);
    if let Some(id) = s.encoder_id() {
        if id != b.encoder_id() {
            return Err(Error::Contract(format!("model was trained on encoder '{id}', backend is '{}'", b.encoder_id())));
        }
    }
    let seq_len = s.checkpoint.config().seq_len;
    let lines: Vec<(String, f64)> = if dirs.is_empty() {
        let split: Split = serde_json::from_value(serde_json::Value::String(split.into()))
            .map_err(|_| Error::Config(format!("unknown split '{split}'")))?;
        let m = manifest(g)?;
        let source = FeatureSource { seq_len, seed: g.seed, ..FeatureSource::new(&m, &b) };
        let entries: Vec<&ManifestEntry> = m.split(split).collect();
        par_map(g.jobs, &entries, |e| {
            Ok((e.video_id.clone(), s.score(&source.sequence(e, &Condition::default())?)?))
        })?
    } else {
        par_map(g.jobs, dirs, |dir| {
            let id = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .ok_or_else(|| Error::Config(format!("cannot name video at {}", dir.display())))?;
            let seq = if b.encodes_pixels() {
                b.encode_clip(&preprocess_eval(&load_clip(dir, &id, seq_len)?)?)?
            } else {
                b.load_cached(&id)?
            };
            Ok((id, s.score(&seq)?))
        })?
    };
    let mut text = String::new();
    for (id, score) in &lines {
        text.push_str(&format!("{id} {score:.6} {}\n", verdict(*score)));
    }
    print!("{text}");
    if g.out.is_some() {
        write_file(&out_dir(g)?.join("predictions.txt"), &text)?;
    }
    Ok(())
}

fn cmd_synth(g: &GlobalArgs) -> Result<()> {
    check_sections(&g.overrides, &["synth"])?;
    let cfg = SynthCorpusConfig { seed: g.seed, ..Default::default() };
    let cfg = apply_overrides(&cfg, "synth", &g.overrides)?;
    let out = out_dir(g)?;
    let m = write_synth_corpus(out, &cfg)?;
    let run = RunConfig {
        verifier: VerifierConfig { seq_len: cfg.seq_len, width: cfg.dim, mlp_hidden: cfg.dim, ..Default::default() },
        // The default lr stalls on this corpus; these settings fit a 10 minute budget.
        train: TrainConfig { lr: 0.003, max_epochs: 150, early_stop_patience: 40, ..Default::default() },
    };
    write_file(&out.join(TRAIN_CONFIG_FILE), serde_json::to_string_pretty(&run)? + "\n")?;
    println!("{} videos", m.entries.len());
    for f in [SYNTH_MANIFEST, SYNTH_BACKEND, TRAIN_CONFIG_FILE] {
        println!("{}", out.join(f).display());
    }
    Ok(())
}

fn cmd_stub_encoder(g: &GlobalArgs, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Config("--dim must be ≥ 1".into()));
    }
    let mut input = std::io::BufReader::new(std::io::stdin().lock());
    let mut output = std::io::BufWriter::new(std::io::stdout().lock());
    stub::serve(&mut input, &mut output, dim, g.seed)
}
