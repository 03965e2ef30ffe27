//! Catalog metadata from the open movie dump and the two
//! movie databases, fetched through a cache-backed client.

pub mod cassette;
mod catalog;
mod client;
mod dump;
mod fetch;
mod filter;
pub mod live;
mod types;

pub use cassette::{Cassette, CassetteResponse, RecordingClient, ReplayClient};
pub use catalog::{
    ingest, Catalog, IngestOptions, IngestReport, ACTORS_FILE, FAILURES_FILE, INGEST_REPORT_FILE, MOVIES_FILE,
    POSTERS_FILE, REJECTS_FILE,
};
pub use client::{CountingClient, DisabledClient, FetchError, MetadataClient, RemoteImage};
pub use dump::{read_movie_dump, MovieDump, Reject, ANIMATION_GENRE};
pub use fetch::{EntityKind, FetchCache, FetchFailure, Fetcher, RetryPolicy};
pub use filter::{filter_movies, filter_records, MovieFilter};
pub use live::{LiveClient, LiveConfig, RateLimiter};
pub use types::{ActorProfileRaw, CastMember, MovieRecord, PosterRef, PosterSource, MAX_PROFILE_IMAGES, MIN_YEAR};
