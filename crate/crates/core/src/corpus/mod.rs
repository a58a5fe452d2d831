//! Unified corpus model, format adapters and task-instance extraction.

mod adapters;
mod extract;
mod model;

pub use adapters::{
    ingest, ingest_mafalda_str, ingest_tabular_bytes, parse_arggraph, Adapter, IngestOutcome, Reject, TabularFormat,
    TabularManifest,
};
pub use extract::{extract, extract_with, ExtractOutcome, RelationMap, Skip};
pub use model::{Component, CorpusRecord, Relation, TaskInstance, Unit};
