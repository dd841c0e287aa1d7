//! Evaluation reports: one row per generator plus an unweighted "Total Avg.",
//! serialized as JSON and as an aligned text table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::perturb::PerturbationSpec;
use crate::error::{Error, Result};

use super::metrics::{accuracy, average_precision, Scored, DEFAULT_THRESHOLD};

pub const TOTAL_AVG: &str = "Total Avg.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRow {
    pub generator: String,
    pub acc: f64,
    pub ap: f64,
    pub n: usize,
    pub n_real: usize,
    pub n_generated: usize,
}

impl GeneratorRow {
    pub fn from_scored(generator: impl Into<String>, set: &[Scored]) -> Result<Self> {
        let generator = generator.into();
        let n_generated = set.iter().filter(|s| s.label.is_generated()).count();
        let ctx = |e: Error| e.context(format!("generator '{generator}'"));
        Ok(GeneratorRow {
            acc: accuracy(set, DEFAULT_THRESHOLD).map_err(ctx)?,
            ap: average_precision(set).map_err(ctx)?,
            n: set.len(),
            n_real: set.len() - n_generated,
            n_generated,
            generator,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub acc: f64,
    pub ap: f64,
}

/// Unweighted mean over rows.
pub fn total_average(rows: impl IntoIterator<Item = (f64, f64)>) -> Average {
    let (mut acc, mut ap, mut n) = (0.0, 0.0, 0usize);
    for (a, p) in rows {
        acc += a;
        ap += p;
        n += 1;
    }
    let n = n.max(1) as f64;
    Average { acc: acc / n, ap: ap / n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTag {
    /// `temporal` (scrambled frames) or `spatial` (replicated frame).
    pub condition: String,
    /// `original` or `probe_as_generated`.
    pub labels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the checkpoint bytes (or a scorer-defined id).
    pub checkpoint: String,
    /// SHA-256 of the manifest file.
    pub manifest: String,
    pub encoder_id: String,
    pub perturbation: Option<PerturbationSpec>,
    pub probe: Option<ProbeTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub threshold: f64,
    pub rows: Vec<GeneratorRow>,
    pub total_avg: Average,
    pub provenance: Provenance,
}

impl EvalReport {
    pub fn new(condition: impl Into<String>, rows: Vec<GeneratorRow>, provenance: Provenance) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Metric("report has no generator rows".into()));
        }
        let total_avg = total_average(rows.iter().map(|r| (r.acc, r.ap)));
        Ok(EvalReport { condition: condition.into(), threshold: DEFAULT_THRESHOLD, rows, total_avg, provenance })
    }

    pub fn row(&self, generator: &str) -> Option<&GeneratorRow> {
        self.rows.iter().find(|r| r.generator == generator)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_table(&self) -> String {
        let rows: Vec<(String, f64, f64, String)> = self
            .rows
            .iter()
            .map(|r| (r.generator.clone(), r.acc, r.ap, r.n.to_string()))
            .chain(std::iter::once((TOTAL_AVG.to_string(), self.total_avg.acc, self.total_avg.ap, String::new())))
            .collect();
        format_table(&format!("condition: {}", self.condition), &rows)
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_pair(dir, stem, &self.to_json()?, &self.to_table())
    }
}

pub(crate) fn write_pair(dir: &Path, stem: &str, json: &str, table: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (ext, body) in [("json", json), ("txt", table)] {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// `(name, acc, ap, n)` rows as a fixed-width table in percent.
pub(crate) fn format_table(title: &str, rows: &[(String, f64, f64, String)]) -> String {
    let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0).max("Generator".len());
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>6}", "Generator", "ACC(%)", "AP(%)", "n");
    for (name, acc, ap, n) in rows {
        let _ = writeln!(out, "{name:<width$}  {:>8.2}  {:>8.2}  {n:>6}", acc * 100.0, ap * 100.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    fn prov() -> Provenance {
        Provenance {
            checkpoint: "c".into(),
            manifest: "m".into(),
            encoder_id: "e".into(),
            perturbation: None,
            probe: None,
        }
    }

    #[test]
    fn single_generator_total_equals_row() {
        let set = vec![
            Scored::new(0.9, Label::Generated, "a"),
            Scored::new(0.2, Label::Real, "b"),
            Scored::new(0.6, Label::Real, "c"),
        ];
        let row = GeneratorRow::from_scored("g", &set).unwrap();
        let r = EvalReport::new("baseline", vec![row.clone()], prov()).unwrap();
        assert_eq!(r.total_avg, Average { acc: row.acc, ap: row.ap });
        let table = r.to_table();
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains("Total Avg."));
        assert!(table.contains("66.67"));
    }

    #[test]
    fn total_is_unweighted() {
        let a = GeneratorRow { generator: "a".into(), acc: 1.0, ap: 1.0, n: 1000, n_real: 500, n_generated: 500 };
        let b = GeneratorRow { generator: "b".into(), acc: 0.5, ap: 0.0, n: 2, n_real: 1, n_generated: 1 };
        let r = EvalReport::new("x", vec![a, b], prov()).unwrap();
        assert_eq!(r.total_avg, Average { acc: 0.75, ap: 0.5 });
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
