//! Ingestion, source labeling, synthetic corpora and the report pipeline
//! built on [`infodemic_core`].

pub mod corpus;
pub mod echo;
pub mod engagement;
pub mod error;
pub mod hashing;
pub mod lifetimes;
pub mod logging;
pub mod report;
pub mod sources;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};

/// Version tag carried by every JSON artifact.
pub const SCHEMA_VERSION: &str = "infodemic/1";
