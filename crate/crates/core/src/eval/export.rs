//! Per-frame feature export for external visualization.

use std::path::Path;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::sequence::FeatureSequence;

pub struct FeatureRecord<'a> {
    pub seq: &'a FeatureSequence,
    pub label: Label,
    pub generator: Option<&'a str>,
}

/// One CSV row per frame: `video_id,frame_index,label,generator,f0..f{D-1}`.
/// Labels are 0 (real) / 1 (generated); floats use shortest round-trip text.
pub fn export_features_csv(records: &[FeatureRecord<'_>], path: &Path) -> Result<usize> {
    let dim = records.first().map_or(0, |r| r.seq.dim());
    if let Some(r) = records.iter().find(|r| r.seq.dim() != dim) {
        return Err(Error::Dimension(format!(
            "'{}' has D={}, earlier sequences have D={dim}",
            r.seq.video_id,
            r.seq.dim()
        )));
    }
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["video_id".to_string(), "frame_index".into(), "label".into(), "generator".into()];
    header.extend((0..dim).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(io)?;
    let mut rows = 0;
    for r in records {
        for t in 0..r.seq.len() {
            let mut rec = vec![
                r.seq.video_id.clone(),
                t.to_string(),
                r.label.index().to_string(),
                r.generator.unwrap_or("").to_string(),
            ];
            rec.extend(r.seq.row(t).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let a = FeatureSequence::from_rows(2, 3, vec![0.1, -1e-30, 3.4028235e38, 1.0 / 3.0, 0.0, -2.5], "a", "e").unwrap();
        let b = FeatureSequence::from_rows(3, 3, vec![0.7; 9], "b,x", "e").unwrap();
        let recs = [
            FeatureRecord { seq: &a, label: Label::Real, generator: None },
            FeatureRecord { seq: &b, label: Label::Generated, generator: Some("g1") },
        ];
        assert_eq!(export_features_csv(&recs, &path).unwrap(), 5);
        let mut rd = csv::Reader::from_path(&path).unwrap();
        assert_eq!(
            rd.headers().unwrap().iter().collect::<Vec<_>>(),
            ["video_id", "frame_index", "label", "generator", "f0", "f1", "f2"]
        );
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(&rows[2][0], "b,x");
        assert_eq!(&rows[2][2], "1");
        let back: Vec<f32> = (4..7).map(|k| rows[0][k].parse().unwrap()).collect();
        assert_eq!(back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), a.row(0).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn mixed_dims_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = FeatureSequence::from_rows(1, 2, vec![0.0; 2], "a", "e").unwrap();
        let b = FeatureSequence::from_rows(1, 3, vec![0.0; 3], "b", "e").unwrap();
        let recs = [
            FeatureRecord { seq: &a, label: Label::Real, generator: None },
            FeatureRecord { seq: &b, label: Label::Real, generator: None },
        ];
        assert!(matches!(export_features_csv(&recs, &dir.path().join("x.csv")), Err(Error::Dimension(_))));
    }
}
