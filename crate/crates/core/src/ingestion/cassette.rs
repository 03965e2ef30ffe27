//! Record/replay test double for [`MetadataClient`].
//!
//! A cassette is a directory of JSON response files keyed by request, plus raw
//! blobs for downloads. [`ReplayClient`] serves a cassette with no network;
//! [`RecordingClient`] forwards to a live client and writes what it sees.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::client::{FetchError, MetadataClient, RemoteImage};
use super::types::PosterSource;
use crate::error::Result;
use crate::io::{sha256_hex, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CassetteResponse {
    Images { images: Vec<RemoteImage> },
    Language { language: Option<String> },
    NotFound,
}

#[derive(Debug, Clone)]
pub struct Cassette {
    root: PathBuf,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

impl Cassette {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cassette { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn posters_path(&self, movie_id: &str, source: PosterSource) -> PathBuf {
        self.root.join("posters").join(source.key()).join(format!("{}.json", sanitize(movie_id)))
    }

    fn actor_path(&self, actor_id: &str, source: PosterSource) -> PathBuf {
        self.root.join("actors").join(source.key()).join(format!("{}.json", sanitize(actor_id)))
    }

    fn language_path(&self, movie_id: &str) -> PathBuf {
        self.root.join("language").join(format!("{}.json", sanitize(movie_id)))
    }

    fn blob_path(&self, url: &str) -> PathBuf {
        self.root.join("blobs").join(sha256_hex(url.as_bytes()))
    }

    fn read(&self, path: &Path) -> Option<CassetteResponse> {
        let bytes = fs::read(path).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn write(&self, path: &Path, response: &CassetteResponse) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(response)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    pub fn put_posters(&self, movie_id: &str, source: PosterSource, response: &CassetteResponse) -> Result<()> {
        self.write(&self.posters_path(movie_id, source), response)
    }

    pub fn put_actor_images(&self, actor_id: &str, source: PosterSource, response: &CassetteResponse) -> Result<()> {
        self.write(&self.actor_path(actor_id, source), response)
    }

    pub fn put_language(&self, movie_id: &str, language: Option<&str>) -> Result<()> {
        self.write(
            &self.language_path(movie_id),
            &CassetteResponse::Language {
                language: language.map(str::to_string),
            },
        )
    }

    pub fn put_blob(&self, url: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.blob_path(url), bytes)
    }
}

fn images_or_miss(response: Option<CassetteResponse>, what: &str) -> Result<Vec<RemoteImage>, FetchError> {
    match response {
        Some(CassetteResponse::Images { images }) => Ok(images),
        Some(CassetteResponse::NotFound) => Err(FetchError::NotFound),
        Some(CassetteResponse::Language { .. }) => Err(FetchError::Permanent(format!("cassette entry for {what} has the wrong kind"))),
        None => Err(FetchError::Offline(format!("no cassette entry for {what}"))),
    }
}

/// Serves recorded responses; never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    cassette: Cassette,
}

impl ReplayClient {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ReplayClient {
            cassette: Cassette::new(root),
        }
    }
}

impl MetadataClient for ReplayClient {
    fn movie_posters(&self, movie_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        let c = &self.cassette;
        images_or_miss(c.read(&c.posters_path(movie_id, source)), &format!("{} posters of {movie_id}", source.key()))
    }

    fn actor_images(&self, actor_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        let c = &self.cassette;
        images_or_miss(c.read(&c.actor_path(actor_id, source)), &format!("{} images of {actor_id}", source.key()))
    }

    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError> {
        let c = &self.cassette;
        match c.read(&c.language_path(movie_id)) {
            Some(CassetteResponse::Language { language }) => Ok(language),
            Some(CassetteResponse::NotFound) => Ok(None),
            Some(_) => Err(FetchError::Permanent(format!("cassette language entry of {movie_id} has the wrong kind"))),
            None => Err(FetchError::Offline(format!("no cassette language entry for {movie_id}"))),
        }
    }

    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        fs::read(self.cassette.blob_path(url)).map_err(|_| FetchError::Offline(format!("no cassette blob for {url}")))
    }
}

/// Forwards to `inner` and records every definitive answer into a cassette.
pub struct RecordingClient<C> {
    inner: C,
    cassette: Cassette,
}

impl<C> RecordingClient<C> {
    pub fn new(inner: C, root: impl Into<PathBuf>) -> Self {
        RecordingClient {
            inner,
            cassette: Cassette::new(root),
        }
    }
}

fn record_images(
    result: Result<Vec<RemoteImage>, FetchError>,
    save: impl FnOnce(&CassetteResponse) -> Result<()>,
) -> Result<Vec<RemoteImage>, FetchError> {
    let response = match &result {
        Ok(images) => CassetteResponse::Images { images: images.clone() },
        Err(FetchError::NotFound) => CassetteResponse::NotFound,
        Err(_) => return result,
    };
    if let Err(e) = save(&response) {
        tracing::warn!("cassette write failed: {e}");
    }
    result
}

impl<C: MetadataClient> MetadataClient for RecordingClient<C> {
    fn movie_posters(&self, movie_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        record_images(self.inner.movie_posters(movie_id, source), |r| {
            self.cassette.put_posters(movie_id, source, r)
        })
    }

    fn actor_images(&self, actor_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        record_images(self.inner.actor_images(actor_id, source), |r| {
            self.cassette.put_actor_images(actor_id, source, r)
        })
    }

    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError> {
        let result = self.inner.movie_language(movie_id);
        if let Ok(lang) = &result {
            if let Err(e) = self.cassette.put_language(movie_id, lang.as_deref()) {
                tracing::warn!("cassette write failed: {e}");
            }
        }
        result
    }

    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let result = self.inner.download(url);
        if let Ok(bytes) = &result {
            if let Err(e) = self.cassette.put_blob(url, bytes) {
                tracing::warn!("cassette write failed: {e}");
            }
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_then_replay() {
        let src = tempfile::tempdir().unwrap();
        let cassette = Cassette::new(src.path());
        let images = vec![RemoteImage {
            id: "p1".into(),
            url: "synthetic://p1".into(),
        }];
        cassette
            .put_posters("tt1", PosterSource::Tmdb, &CassetteResponse::Images { images: images.clone() })
            .unwrap();
        cassette.put_posters("tt1", PosterSource::ImdbMain, &CassetteResponse::NotFound).unwrap();
        cassette.put_blob("synthetic://p1", b"bytes").unwrap();
        cassette.put_language("tt1", Some("en")).unwrap();

        let dst = tempfile::tempdir().unwrap();
        let rec = RecordingClient::new(ReplayClient::new(src.path()), dst.path());
        assert_eq!(rec.movie_posters("tt1", PosterSource::Tmdb).unwrap(), images);
        assert_eq!(rec.movie_posters("tt1", PosterSource::ImdbMain), Err(FetchError::NotFound));
        assert_eq!(rec.download("synthetic://p1").unwrap(), b"bytes");
        assert_eq!(rec.movie_language("tt1").unwrap().as_deref(), Some("en"));
        assert!(matches!(rec.movie_posters("tt2", PosterSource::Tmdb), Err(FetchError::Offline(_))));

        let replay = ReplayClient::new(dst.path());
        assert_eq!(replay.movie_posters("tt1", PosterSource::Tmdb).unwrap(), images);
        assert_eq!(replay.movie_posters("tt1", PosterSource::ImdbMain), Err(FetchError::NotFound));
        assert_eq!(replay.download("synthetic://p1").unwrap(), b"bytes");
        assert_eq!(replay.movie_language("tt1").unwrap().as_deref(), Some("en"));
        assert!(matches!(replay.movie_posters("tt2", PosterSource::Tmdb), Err(FetchError::Offline(_))));
    }
}
