//! Configuration, data ingestion, the end-to-end workflow and its outputs.

mod analysis;
mod config;
mod emit;
mod ingest;
pub mod svg;

pub use analysis::{
    fit_window, return_tables, run_analysis, run_workflow, Analysis, Bundle, ModelSource,
    ReturnKind, ReturnRow, StationarityTest, WindowFit, WindowModel,
};
pub use config::{FrechetCheck, WorkflowConfig};
pub(crate) use analysis::fit_options;
pub use emit::emit_outputs;
pub use ingest::{ingest_csv, write_series_csv, Ingested};
