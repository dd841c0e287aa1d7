//! Metrics, reports and experiment drivers.

pub mod drivers;
pub mod export;
pub mod metrics;
pub mod parallel;
pub mod report;
pub mod source;
pub mod spectrum;

pub use drivers::{
    eval_cross_generator, probe_eval, robustness_sweep, score_test_split, DifferenceRow, ProbeLabels,
    ProbeReport, VerifierScorer, VideoScorer, test_spectra,
};
pub use export::{export_features_csv, FeatureRecord};
pub use metrics::{accuracy, aggregate_frames, average_precision, Scored, DEFAULT_THRESHOLD};
pub use parallel::par_map;
pub use report::{EvalReport, GeneratorRow, Provenance};
pub use source::{Condition, FeatureSource, ProbeKind};
pub use spectrum::{avg_spectrum, SpectrumGrid};
