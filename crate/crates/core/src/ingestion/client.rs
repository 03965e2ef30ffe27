use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::types::PosterSource;

/// An image as listed by a metadata source, before download.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteImage {
    /// Source-side identifier, unique within the source.
    pub id: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("not found")]
    NotFound,
    #[error("transient network failure: {0}")]
    Transient(String),
    #[error("network disabled: {0}")]
    Offline(String),
    #[error("request failed: {0}")]
    Permanent(String),
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::Transient(_))
    }
}

/// Access to the two movie databases.
///
/// Listing calls return the source-side order; that order is preserved all the
/// way into the catalog.
pub trait MetadataClient: Send + Sync {
    fn movie_posters(&self, movie_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError>;

    fn actor_images(&self, actor_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError>;

    /// ISO 639-1 original language of a movie, when the source knows it.
    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError>;

    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

impl<C: MetadataClient + ?Sized> MetadataClient for Arc<C> {
    fn movie_posters(&self, movie_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        (**self).movie_posters(movie_id, source)
    }
    fn actor_images(&self, actor_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        (**self).actor_images(actor_id, source)
    }
    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError> {
        (**self).movie_language(movie_id)
    }
    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        (**self).download(url)
    }
}

/// Wraps a client and counts every call that reaches it.
pub struct CountingClient<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        CountingClient {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

impl<C: MetadataClient> MetadataClient for CountingClient<C> {
    fn movie_posters(&self, movie_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        self.tick();
        self.inner.movie_posters(movie_id, source)
    }
    fn actor_images(&self, actor_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        self.tick();
        self.inner.actor_images(actor_id, source)
    }
    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError> {
        self.tick();
        self.inner.movie_language(movie_id)
    }
    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.tick();
        self.inner.download(url)
    }
}

/// A client with the network switched off: every call fails with [`FetchError::Offline`].
#[derive(Debug, Default, Clone, Copy)]
pub struct DisabledClient;

impl MetadataClient for DisabledClient {
    fn movie_posters(&self, movie_id: &str, _: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        Err(FetchError::Offline(format!("posters of {movie_id}")))
    }
    fn actor_images(&self, actor_id: &str, _: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        Err(FetchError::Offline(format!("images of {actor_id}")))
    }
    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError> {
        Err(FetchError::Offline(format!("language of {movie_id}")))
    }
    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        Err(FetchError::Offline(url.to_string()))
    }
}
