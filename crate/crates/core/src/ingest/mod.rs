//! Physical catalog ingestion: DDL parsing, value sketches and sidecar metadata.

mod catalog;
mod ddl;
mod model;
mod sidecar;
mod sketch;

pub use catalog::{CatalogPage, CatalogQuery, IngestSummary, PhysicalCatalog, TableListing, DEFAULT_PAGE_SIZE};
pub use ddl::{count_create_table_heads, parse_ddl, ParseOptions, ParsedSource};
pub use model::{
    normalize_type, ByteSpan, ColumnRecord, Constraint, DiagnosticCode, NormalizedType,
    ParseDiagnostic, Severity, SourceRecord, TableRecord,
};
pub use sidecar::{ColumnMetadata, SidecarMetadata};
pub use sketch::{CardinalitySketch, SketchBuilder, ValueSketch, EXACT_DISTINCT_LIMIT, MAX_SAMPLES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("input is empty")]
    EmptyInput,
    #[error("input is not valid UTF-8 (first invalid byte at offset {offset})")]
    Encoding { offset: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("source `{name}` already ingested from `{existing_origin}`")]
    SourceConflict { name: String, existing_origin: String },
    #[error("sidecar line {line}: {message}")]
    Sidecar { line: usize, message: String },
    #[error("invalid catalog query: {0}")]
    InvalidQuery(String),
}
