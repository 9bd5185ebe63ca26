//! Generators, the end-to-end pipeline and experiment reports.

mod generators;
mod pipeline;

pub use generators::{
    gen_random_layered, gen_random_set_cover, gen_set_cover, set_cover_gap, RANDOM_RETRIES,
};
pub use pipeline::{
    prepare, run_layered, run_pipeline, run_suite, to_tsv, ConfigEcho, ExperimentReport,
    OracleSource, PipelineConfig, ReportRow, Suite,
};
