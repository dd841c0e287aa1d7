//! Experiment drivers: cross-generator evaluation, robustness sweeps and
//! temporal/spatial probes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::data::perturb::PerturbationSpec;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::sequence::FeatureSequence;
use crate::verifier::{predict, Checkpoint};

use super::metrics::Scored;
use super::parallel::par_map;
use super::report::{format_table, total_average, write_pair, EvalReport, GeneratorRow, ProbeTag, Provenance, TOTAL_AVG};
use super::source::{preprocessed_clip, Condition, FeatureSource, ProbeKind};
use super::spectrum::{avg_spectrum, SpectrumGrid};

/// Anything that maps a feature sequence to P(generated).
pub trait VideoScorer: Sync {
    /// Identifier recorded in report provenance.
    fn id(&self) -> String;
    /// Encoder the scorer was trained against, if it cares.
    fn encoder_id(&self) -> Option<&str>;
    fn score(&self, seq: &FeatureSequence) -> Result<f64>;
}

/// A trained verifier loaded from a checkpoint.
pub struct VerifierScorer {
    pub checkpoint: Checkpoint,
    pub checkpoint_id: String,
}

impl VerifierScorer {
    pub fn new(checkpoint: Checkpoint) -> Result<Self> {
        let checkpoint_id = hex::encode(Sha256::digest(checkpoint.to_bytes()?));
        Ok(VerifierScorer { checkpoint, checkpoint_id })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let checkpoint = Checkpoint::from_bytes(&bytes)
            .map_err(|e| e.context(format!("checkpoint {}", path.display())))?;
        Ok(VerifierScorer { checkpoint, checkpoint_id: hex::encode(Sha256::digest(&bytes)) })
    }
}

impl VideoScorer for VerifierScorer {
    fn id(&self) -> String {
        self.checkpoint_id.clone()
    }

    fn encoder_id(&self) -> Option<&str> {
        Some(&self.checkpoint.encoder_id)
    }

    fn score(&self, seq: &FeatureSequence) -> Result<f64> {
        if seq.encoder_id != self.checkpoint.encoder_id {
            return Err(Error::Contract(format!(
                "sequence '{}' comes from encoder '{}', checkpoint expects '{}'",
                seq.video_id, seq.encoder_id, self.checkpoint.encoder_id
            )));
        }
        Ok(predict(seq, &self.checkpoint.params)? as f64)
    }
}

fn check_encoder(scorer: &dyn VideoScorer, source: &FeatureSource<'_>) -> Result<()> {
    match scorer.encoder_id() {
        Some(id) if id != source.backend.encoder_id() => Err(Error::Contract(format!(
            "model was trained on encoder '{id}', backend is '{}'",
            source.backend.encoder_id()
        ))),
        _ => Ok(()),
    }
}

fn provenance(scorer: &dyn VideoScorer, source: &FeatureSource<'_>, cond: &Condition) -> Provenance {
    Provenance {
        checkpoint: scorer.id(),
        manifest: source.manifest.content_hash.clone(),
        encoder_id: source.backend.encoder_id().to_string(),
        perturbation: cond.perturbation,
        probe: None,
    }
}

fn test_entries<'m>(source: &FeatureSource<'m>) -> Result<Vec<&'m ManifestEntry>> {
    let entries: Vec<&ManifestEntry> = source.manifest.split(Split::Test).collect();
    if entries.is_empty() {
        return Err(Error::Data("manifest has no test entries".into()));
    }
    Ok(entries)
}

fn score_entries(
    scorer: &dyn VideoScorer,
    source: &FeatureSource<'_>,
    entries: &[&ManifestEntry],
    cond: &Condition,
    jobs: usize,
) -> Result<Vec<Scored>> {
    par_map(jobs, entries, |e| {
        let seq = source.sequence(e, cond)?;
        let score = scorer.score(&seq).map_err(|err| err.context(format!("scoring '{}'", e.video_id)))?;
        if !score.is_finite() {
            return Err(Error::Metric(format!("non-finite score for '{}'", e.video_id)));
        }
        Ok(Scored { score, label: e.label, video_id: e.video_id.clone(), generator: e.generator.clone() })
    })
}

/// Per-generator test sets: all real test videos plus that generator's fakes.
/// Positives without a generator (relabeled probes) join every set.
/// Generators without test fakes are skipped.
fn generator_rows(generators: &[String], scored: &[Scored]) -> Result<Vec<GeneratorRow>> {
    let mut rows = Vec::new();
    for g in generators {
        let own = |s: &Scored| s.generator.as_deref() == Some(g.as_str());
        let set: Vec<Scored> = scored
            .iter()
            .filter(|s| s.label == Label::Real || s.generator.is_none() || own(s))
            .cloned()
            .collect();
        if set.iter().any(|s| s.label.is_generated() && own(s)) {
            rows.push(GeneratorRow::from_scored(g.clone(), &set)?);
        } else {
            log::warn!("generator '{g}' has no test videos; row omitted");
        }
    }
    Ok(rows)
}

/// Scores the test split under `cond` and reports ACC/AP per generator.
pub fn eval_cross_generator(
    scorer: &dyn VideoScorer,
    source: &FeatureSource<'_>,
    cond: &Condition,
    jobs: usize,
) -> Result<EvalReport> {
    check_encoder(scorer, source)?;
    let entries = test_entries(source)?;
    let scored = score_entries(scorer, source, &entries, cond, jobs)?;
    let rows = generator_rows(&source.manifest.generator_names(), &scored)?;
    EvalReport::new(cond.tag(), rows, provenance(scorer, source, cond))
}

/// Scores of the test split under `cond`, in manifest order.
pub fn score_test_split(
    scorer: &dyn VideoScorer,
    source: &FeatureSource<'_>,
    cond: &Condition,
    jobs: usize,
) -> Result<Vec<Scored>> {
    check_encoder(scorer, source)?;
    score_entries(scorer, source, &test_entries(source)?, cond, jobs)
}

/// Baseline report followed by one report per perturbation spec.
pub fn robustness_sweep(
    scorer: &dyn VideoScorer,
    source: &FeatureSource<'_>,
    specs: &[PerturbationSpec],
    jobs: usize,
) -> Result<Vec<EvalReport>> {
    for s in specs {
        s.validate()?;
    }
    let mut reports = vec![eval_cross_generator(scorer, source, &Condition::default(), jobs)?];
    for spec in specs {
        let report = eval_cross_generator(scorer, source, &Condition::perturbed(*spec), jobs)
            .map_err(|e| e.context(format!("perturbation {}", spec.tag())))?;
        reports.push(report);
    }
    Ok(reports)
}

/// How probed real videos are labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeLabels {
    /// Probed videos keep their labels.
    Original,
    /// Probed real videos become positives; unprobed real videos stay the negatives.
    ProbeAsGenerated,
}

impl ProbeLabels {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeLabels::Original => "original",
            ProbeLabels::ProbeAsGenerated => "probe_as_generated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRow {
    pub generator: String,
    pub acc: f64,
    pub ap: f64,
}

/// Temporal and spatial reports for one labeling mode, with
/// `Difference = spatial − temporal` per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub labels: ProbeLabels,
    pub temporal: EvalReport,
    pub spatial: EvalReport,
    pub difference: Vec<DifferenceRow>,
}

impl ProbeReport {
    fn new(labels: ProbeLabels, temporal: EvalReport, spatial: EvalReport) -> Self {
        let mut difference: Vec<DifferenceRow> = spatial
            .rows
            .iter()
            .filter_map(|s| {
                temporal.row(&s.generator).map(|t| DifferenceRow {
                    generator: s.generator.clone(),
                    acc: s.acc - t.acc,
                    ap: s.ap - t.ap,
                })
            })
            .collect();
        let avg = total_average(difference.iter().map(|d| (d.acc, d.ap)));
        difference.push(DifferenceRow { generator: TOTAL_AVG.into(), acc: avg.acc, ap: avg.ap });
        ProbeReport { labels, temporal, spatial, difference }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_table(&self) -> String {
        let diff: Vec<(String, f64, f64, String)> =
            self.difference.iter().map(|d| (d.generator.clone(), d.acc, d.ap, String::new())).collect();
        format!(
            "labels: {}\n\n{}\n{}\n{}",
            self.labels.as_str(),
            self.temporal.to_table(),
            self.spatial.to_table(),
            format_table("condition: difference (spatial - temporal)", &diff)
        )
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_pair(dir, stem, &self.to_json()?, &self.to_table())
    }
}

/// Which videos a probe touches: scrambling targets real videos, replication
/// targets every video.
fn probe_targets(kind: ProbeKind, label: Label) -> bool {
    match kind {
        ProbeKind::Temporal => label == Label::Real,
        ProbeKind::Spatial => true,
    }
}

/// Temporal (scrambled) and spatial (replicated) probe reports under both
/// labeling modes.
pub fn probe_eval(scorer: &dyn VideoScorer, source: &FeatureSource<'_>, jobs: usize) -> Result<Vec<ProbeReport>> {
    check_encoder(scorer, source)?;
    let entries = test_entries(source)?;
    let generators = source.manifest.generator_names();
    let original = score_entries(scorer, source, &entries, &Condition::default(), jobs)?;
    let mut by_mode: Vec<(ProbeLabels, Vec<EvalReport>)> =
        vec![(ProbeLabels::Original, Vec::new()), (ProbeLabels::ProbeAsGenerated, Vec::new())];
    for kind in [ProbeKind::Temporal, ProbeKind::Spatial] {
        let targets: Vec<&ManifestEntry> = entries.iter().copied().filter(|e| probe_targets(kind, e.label)).collect();
        let probed = score_entries(scorer, source, &targets, &Condition::probed(kind), jobs)
            .map_err(|e| e.context(format!("{} probe", kind.as_str())))?;
        let mut probed_iter = probed.into_iter();
        // Probed stand-ins for targeted videos, originals for the rest.
        let replaced: Vec<Scored> = entries
            .iter()
            .zip(&original)
            .map(|(e, o)| if probe_targets(kind, e.label) { probed_iter.next().expect("one per target") } else { o.clone() })
            .collect();
        for (labels, reports) in &mut by_mode {
            let scored: Vec<Scored> = match labels {
                ProbeLabels::Original => replaced.clone(),
                ProbeLabels::ProbeAsGenerated => {
                    let mut set: Vec<Scored> = original.iter().filter(|s| s.label == Label::Real).cloned().collect();
                    for (e, s) in entries.iter().zip(&replaced) {
                        let mut s = s.clone();
                        if probe_targets(kind, e.label) && s.label == Label::Real {
                            s.label = Label::Generated;
                            s.video_id = format!("{}#{}", s.video_id, kind.as_str());
                            s.generator = None;
                        }
                        if s.label.is_generated() {
                            set.push(s);
                        }
                    }
                    set
                }
            };
            let rows = generator_rows(&generators, &scored)?;
            let cond = Condition::probed(kind);
            let mut prov = provenance(scorer, source, &cond);
            prov.probe = Some(ProbeTag { condition: kind.as_str().into(), labels: labels.as_str().into() });
            reports.push(EvalReport::new(kind.as_str(), rows, prov)?);
        }
    }
    Ok(by_mode
        .into_iter()
        .map(|(labels, mut reports)| {
            let spatial = reports.pop().expect("spatial report");
            let temporal = reports.pop().expect("temporal report");
            ProbeReport::new(labels, temporal, spatial)
        })
        .collect())
}

/// Average spectra of preprocessed test frames: one grid for real videos,
/// then one per generator. Per-video grids are merged in manifest order.
pub fn test_spectra(manifest: &DatasetManifest, seq_len: usize, jobs: usize) -> Result<Vec<SpectrumGrid>> {
    let entries: Vec<&ManifestEntry> = manifest.split(Split::Test).collect();
    if entries.is_empty() {
        return Err(Error::Data("manifest has no test entries".into()));
    }
    let per_video = par_map(jobs, &entries, |e| {
        let clip = preprocessed_clip(manifest, e, seq_len)?;
        avg_spectrum(&clip.frames, &e.video_id)
    })?;
    let mut groups: Vec<(String, Option<SpectrumGrid>)> = vec![("real".to_string(), None)];
    groups.extend(manifest.generator_names().into_iter().map(|g| (g, None)));
    for (e, grid) in entries.iter().zip(per_video) {
        let key = match e.label {
            Label::Real => "real",
            Label::Generated => e.generator.as_deref().unwrap_or_default(),
        };
        if let Some((name, slot)) = groups.iter_mut().find(|(name, _)| name == key) {
            match slot {
                Some(acc) => acc.merge(&grid)?,
                None => *slot = Some(SpectrumGrid { source: name.clone(), ..grid }),
            }
        }
    }
    Ok(groups.into_iter().filter_map(|(_, g)| g).collect())
}
