//! `decof` command-line driver.
//!
//! Every subcommand reads JSON configs, runs one pipeline stage from
//! `decof-core` and writes its artifacts under `--out`. Exit codes: 0 success,
//! 2 configuration error, 3 data error, 4 runtime or numeric error.

mod commands;
mod overrides;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use decof_core::{Error, ErrorClass};

pub use commands::run;
pub use overrides::apply_overrides;

#[derive(Debug, Parser)]
#[command(name = "decof", version, about = "Detect generated videos by classifying sequences of per-frame encoder features")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Encoder backend config (JSON).
    #[arg(long, global = true)]
    pub backend: Option<PathBuf>,
    /// Verifier checkpoint (DCOF).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-video work; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Config override `key=value` (dotted keys, JSON values); repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode every manifest entry into feature-cache files under --out.
    Encode,
    /// Train a verifier on the train split, selecting on val.
    Train {
        /// Run config JSON: {"verifier": {...}, "train": {...}}.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train on the real videos plus this generator's fakes only.
        #[arg(long)]
        generator: Option<String>,
    },
    /// Cross-generator evaluation of the test split.
    Eval {
        /// Also write per-frame test features as CSV.
        #[arg(long)]
        export_features: Option<PathBuf>,
    },
    /// Temporal (scrambled) and spatial (replicated) probe evaluation.
    Probe,
    /// Robustness sweep: baseline plus each perturbation.
    Perturb {
        /// JSON list of perturbation specs; defaults to blur σ 1,2,3 and JPEG 90..50.
        #[arg(long)]
        specs: Option<PathBuf>,
    },
    /// Average frame spectra of the test split, per real/generator group.
    Spectrum,
    /// Score videos: manifest entries of --split, or frame folders given as arguments.
    Predict {
        #[arg(long, default_value = "test")]
        split: String,
        /// Frame folders; the folder name is the video id.
        dirs: Vec<PathBuf>,
    },
    /// Write a synthetic feature corpus with a planted temporal inconsistency.
    Synth,
    /// Serve the deterministic stub encoder on stdin/stdout (pipeline wiring checks).
    StubEncoder {
        #[arg(long, default_value_t = 64)]
        dim: usize,
    },
}

/// Parses `args` (program name first) and runs the command, as `main` does.
pub fn run_from<I, T>(args: I) -> decof_core::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Runtime => 4,
    }
}
