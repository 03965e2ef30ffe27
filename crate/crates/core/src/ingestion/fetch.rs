use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::client::{FetchError, MetadataClient, RemoteImage};
use super::types::{ActorProfileRaw, MovieRecord, PosterRef, PosterSource, MAX_PROFILE_IMAGES};
use crate::error::Result;
use crate::io::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, FetchError>) -> Result<T, FetchError> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt + 1 < self.max_attempts.max(1) => {
                    thread::sleep(self.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Movie,
    Actor,
}

impl EntityKind {
    fn dir(self) -> &'static str {
        match self {
            EntityKind::Movie => "posters",
            EntityKind::Actor => "actors",
        }
    }
}

/// One line of `fetch_failures.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FetchFailure {
    pub kind: EntityKind,
    pub id: String,
    pub source: Option<PosterSource>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CachedImage {
    remote_id: String,
    file: String,
    width: u32,
    height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CachedListing {
    images: Vec<CachedImage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CachedLanguage {
    language: Option<String>,
}

/// On-disk cache keyed by (entity, source). Entries are written atomically and
/// never rewritten, so concurrent fetchers of distinct keys do not interfere.
#[derive(Debug, Clone)]
pub struct FetchCache {
    root: PathBuf,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl FetchCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FetchCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn listing_path(&self, kind: EntityKind, id: &str, source: PosterSource) -> PathBuf {
        self.root
            .join("listings")
            .join(kind.dir())
            .join(source.key())
            .join(format!("{}.json", sanitize(id)))
    }

    fn language_path(&self, movie_id: &str) -> PathBuf {
        self.root.join("listings").join("language").join(format!("{}.json", sanitize(movie_id)))
    }

    fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
        serde_json::from_slice(&fs::read(path).ok()?).ok()
    }
}

fn extension(bytes: &[u8]) -> &'static str {
    match image::guess_format(bytes) {
        Ok(image::ImageFormat::Png) => "png",
        Ok(image::ImageFormat::Jpeg) => "jpg",
        Ok(image::ImageFormat::WebP) => "webp",
        Ok(image::ImageFormat::Gif) => "gif",
        _ => "img",
    }
}

/// Cache-backed fetching of posters and actor pictures.
pub struct Fetcher<C> {
    client: C,
    cache: FetchCache,
    retry: RetryPolicy,
    failures: Mutex<Vec<FetchFailure>>,
}

impl<C: MetadataClient> Fetcher<C> {
    pub fn new(client: C, cache: FetchCache, retry: RetryPolicy) -> Self {
        Fetcher {
            client,
            cache,
            retry,
            failures: Mutex::new(Vec::new()),
        }
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    fn fail(&self, kind: EntityKind, id: &str, source: Option<PosterSource>, reason: String) {
        self.failures.lock().unwrap().push(FetchFailure {
            kind,
            id: id.to_string(),
            source,
            reason,
        });
    }

    /// Drain the failures ledger, sorted so concurrent runs agree.
    pub fn take_failures(&self) -> Vec<FetchFailure> {
        let mut out = std::mem::take(&mut *self.failures.lock().unwrap());
        out.sort();
        out
    }

    /// Listing for one (entity, source) with its images cached locally.
    /// `Ok(None)` means the source does not know the entity.
    fn listing(
        &self,
        kind: EntityKind,
        id: &str,
        source: PosterSource,
        limit: Option<usize>,
    ) -> Result<Option<CachedListing>, FetchError> {
        let path = self.cache.listing_path(kind, id, source);
        if let Some(cached) = FetchCache::load::<Option<CachedListing>>(&path) {
            return Ok(cached);
        }
        let remote = self.retry.run(|| match kind {
            EntityKind::Movie => self.client.movie_posters(id, source),
            EntityKind::Actor => self.client.actor_images(id, source),
        });
        let remote = match remote {
            Ok(r) => r,
            Err(FetchError::NotFound) => {
                self.persist(&path, &None::<CachedListing>)?;
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let take = limit.unwrap_or(usize::MAX);
        let mut images = Vec::new();
        for img in remote.iter().take(take) {
            if let Some(cached) = self.download(kind, id, source, img)? {
                images.push(cached);
            }
        }
        let listing = CachedListing { images };
        self.persist(&path, &Some(listing.clone()))?;
        Ok(Some(listing))
    }

    fn persist<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), FetchError> {
        write_json(path, value).map_err(|e| FetchError::Permanent(format!("cache write: {e}")))
    }

    fn download(
        &self,
        kind: EntityKind,
        owner: &str,
        source: PosterSource,
        img: &RemoteImage,
    ) -> Result<Option<CachedImage>, FetchError> {
        let bytes = self.retry.run(|| self.client.download(&img.url))?;
        let decoded = match image::load_from_memory(&bytes) {
            Ok(d) => d,
            Err(e) => {
                self.fail(kind, owner, Some(source), format!("undecodable image {}: {e}", img.url));
                return Ok(None);
            }
        };
        let rel = format!(
            "images/{}/{}/{}.{}",
            kind.dir(),
            source.key(),
            sanitize(&img.id),
            extension(&bytes)
        );
        let path = self.cache.root.join(&rel);
        crate::io::write_atomic(&path, &bytes).map_err(|e| FetchError::Permanent(format!("cache write: {e}")))?;
        Ok(Some(CachedImage {
            remote_id: img.id.clone(),
            file: rel,
            width: decoded.width(),
            height: decoded.height(),
        }))
    }

    /// Both sources' posters, IMDb main poster first.
    pub fn fetch_posters(&self, movie: &MovieRecord) -> Vec<PosterRef> {
        let mut out = Vec::new();
        let mut known = false;
        for source in PosterSource::ALL {
            let limit = (source == PosterSource::ImdbMain).then_some(1);
            match self.listing(EntityKind::Movie, &movie.movie_id, source, limit) {
                Ok(Some(listing)) => {
                    known = true;
                    out.extend(listing.images.into_iter().map(|c| PosterRef {
                        poster_id: format!("{}:{}", source.key(), c.remote_id),
                        movie_id: movie.movie_id.clone(),
                        source,
                        image_path: self.cache.root.join(c.file),
                        width: c.width,
                        height: c.height,
                    }));
                }
                Ok(None) => {}
                Err(e) => {
                    known = true;
                    self.fail(EntityKind::Movie, &movie.movie_id, Some(source), e.to_string());
                }
            }
        }
        if !known {
            self.fail(EntityKind::Movie, &movie.movie_id, None, "absent from every source".into());
        }
        out
    }

    /// Up to three profile pictures per actor, source priority then source order.
    pub fn fetch_actor_profiles(&self, cast: &[String], names: &HashMap<String, String>) -> Vec<ActorProfileRaw> {
        cast.iter()
            .map(|actor_id| {
                let mut paths = Vec::new();
                for source in PosterSource::ALL {
                    if paths.len() >= MAX_PROFILE_IMAGES {
                        break;
                    }
                    match self.listing(EntityKind::Actor, actor_id, source, Some(MAX_PROFILE_IMAGES)) {
                        Ok(Some(listing)) => paths.extend(listing.images.into_iter().map(|c| self.cache.root.join(c.file))),
                        Ok(None) => {}
                        Err(e) => self.fail(EntityKind::Actor, actor_id, Some(source), e.to_string()),
                    }
                }
                paths.truncate(MAX_PROFILE_IMAGES);
                ActorProfileRaw {
                    actor_id: actor_id.clone(),
                    name: names.get(actor_id).cloned().unwrap_or_else(|| actor_id.clone()),
                    image_paths: paths,
                }
            })
            .collect()
    }

    /// Fill in the original language when the dump did not carry one.
    pub fn movie_language(&self, movie_id: &str) -> Option<String> {
        let path = self.cache.language_path(movie_id);
        if let Some(cached) = FetchCache::load::<CachedLanguage>(&path) {
            return cached.language;
        }
        match self.retry.run(|| self.client.movie_language(movie_id)) {
            Ok(language) => {
                let entry = CachedLanguage { language };
                if let Err(e) = self.persist(&path, &entry) {
                    tracing::warn!("{e}");
                }
                entry.language
            }
            Err(FetchError::NotFound) => None,
            Err(e) => {
                self.fail(EntityKind::Movie, movie_id, None, format!("language lookup: {e}"));
                None
            }
        }
    }
}
