//! Catalog service, HTTP API and command-line interface for lakescope.

pub mod cli;
pub mod error;
pub mod http;
pub mod jobs;
pub mod plugin_support;
pub mod service;
pub mod store;
pub mod views;

pub use error::ServiceError;
pub use service::{Service, ServiceOptions};
