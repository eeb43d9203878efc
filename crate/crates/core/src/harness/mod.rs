//! Data ingestion, synthetic plants and the experiment loop.

mod data;
mod experiment;

pub use data::{ingest_csv, write_csv, CsvSamples, Generator, Sample, SyntheticKind, SyntheticSpec};
pub use experiment::{
    run_experiment, run_with_writer, DataSource, ExperimentConfig, LogLine, RunStatus, Summary, WeightInit,
    DIVERGENCE_CAP,
};
