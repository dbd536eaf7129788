//! Files, configuration and run orchestration.

pub mod cache;
pub mod captions;
pub mod config;
pub mod embeddings;
pub mod frames;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod record;
pub mod synthetic;

pub use config::{load_config, RunConfig};
pub use embeddings::{load_embeddings, write_embeddings};
pub use manifest::{load_manifest, DatasetManifest, DatasetTag};
pub use pipeline::{Pipeline, RunOptions, RunSummary, Stage};
