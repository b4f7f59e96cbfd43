//! Data-lake schema discovery: physical catalog ingestion, column profiling,
//! model-backed summarization, embedding, hierarchical catalog construction,
//! semantic search and relation analysis.

pub mod ids;
pub mod ingest;
pub mod jsonl;
pub mod tokens;
pub mod gateway;
pub mod embed;
pub mod cluster;
pub mod index;
pub mod profile;
pub mod hierarchy;
pub mod relation;
pub mod config;
pub mod search;
pub mod registry;
