//! Ethnic representation analytics for movie posters.
//!
//! The crate is organised as a batch pipeline:
//!
//! - [`ingestion`] reads the open movie dump, filters it and fetches posters
//!   and actor profile pictures through a cache-backed [`ingestion::MetadataClient`].
//! - [`imageprep`] computes difference hashes, deduplicates posters within a
//!   movie and drops grayscale actor pictures.
//! - [`gateway`] is the file protocol that face-model backends speak
//!   (detections, embeddings, ethnicity scores), plus a deterministic mock backend.
//! - [`identity`] matches poster faces to cast members and votes each actor's ethnicity.
//! - [`demographics`] holds census distributions and parity ratios.
//! - [`metrics`] computes the movie-level representation statistics.
//! - [`report`] renders metric tables as SVG charts.
//! - [`pipeline`] chains every stage with digest-based resumption.
//!
//! [`synthetic`] builds small planted corpora used by the examples and tests.

pub mod demographics;
pub mod error;
pub mod ethnicity;
pub mod gateway;
pub mod identity;
pub mod imageprep;
pub mod ingestion;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
pub use ethnicity::{Ethnicity, EthnicityModel};

/// Version of the on-disk formats (catalog, bundle, metric CSVs).
pub const FORMAT_VERSION: &str = "1";

/// Crate version.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
