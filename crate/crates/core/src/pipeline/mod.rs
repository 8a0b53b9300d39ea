//! File formats, dataset ingestion, synthetic data and the end-to-end run.

pub mod config;
pub mod format;
pub mod ingest;
pub mod run;
pub mod synth;

pub use config::PipelineConfig;
pub use ingest::{ingest, ingest_strict, Dataset, Video};
pub use run::{ablate, evaluate, run, run_with_mask, write_outputs, RunOutcome, RunReport};
pub use synth::{generate_synthetic, write_synthetic, SynthSpec};
