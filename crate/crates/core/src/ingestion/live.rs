//! Live client: TMDB for listings, OMDb for the IMDb main poster.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::client::{FetchError, MetadataClient, RemoteImage};
use super::types::PosterSource;

const TMDB_API: &str = "https://api.themoviedb.org/3";
const TMDB_IMAGES: &str = "https://image.tmdb.org/t/p/original";
const OMDB_API: &str = "https://www.omdbapi.com/";
const MAX_IMAGE_BYTES: u64 = 64 * 1024 * 1024;

/// Spaces requests at least `1 / rps` apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(rps: f64) -> Self {
        let interval = if rps > 0.0 {
            Duration::from_secs_f64(1.0 / rps)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub tmdb_api_key: String,
    pub omdb_api_key: Option<String>,
    pub requests_per_second: f64,
}

impl LiveConfig {
    /// Keys from `TMDB_API_KEY` and `OMDB_API_KEY`.
    pub fn from_env(requests_per_second: f64) -> Option<Self> {
        Some(LiveConfig {
            tmdb_api_key: std::env::var("TMDB_API_KEY").ok()?,
            omdb_api_key: std::env::var("OMDB_API_KEY").ok(),
            requests_per_second,
        })
    }
}

pub struct LiveClient {
    agent: ureq::Agent,
    config: LiveConfig,
    limiter: RateLimiter,
}

#[derive(Deserialize)]
struct FindResponse {
    #[serde(default)]
    movie_results: Vec<FindMovie>,
    #[serde(default)]
    person_results: Vec<FindPerson>,
}

#[derive(Deserialize)]
struct FindMovie {
    id: u64,
    original_language: Option<String>,
}

#[derive(Deserialize)]
struct FindPerson {
    id: u64,
}

#[derive(Deserialize)]
struct ImageEntry {
    file_path: String,
}

#[derive(Deserialize)]
struct MovieImages {
    #[serde(default)]
    posters: Vec<ImageEntry>,
}

#[derive(Deserialize)]
struct PersonImages {
    #[serde(default)]
    profiles: Vec<ImageEntry>,
}

#[derive(Deserialize)]
struct OmdbTitle {
    #[serde(rename = "Response")]
    response: String,
    #[serde(rename = "Poster")]
    poster: Option<String>,
}

fn classify(e: ureq::Error) -> FetchError {
    match e {
        ureq::Error::StatusCode(404) => FetchError::NotFound,
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => FetchError::Transient(format!("HTTP {code}")),
        ureq::Error::StatusCode(code) => FetchError::Permanent(format!("HTTP {code}")),
        ureq::Error::Io(e) => FetchError::Transient(e.to_string()),
        ureq::Error::Timeout(t) => FetchError::Transient(format!("timeout: {t:?}")),
        other => FetchError::Transient(other.to_string()),
    }
}

fn image_id(file_path: &str) -> String {
    let name = file_path.trim_start_matches('/');
    name.rsplit_once('.').map_or(name, |(stem, _)| stem).to_string()
}

impl LiveClient {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        LiveClient {
            limiter: RateLimiter::per_second(config.requests_per_second),
            agent,
            config,
        }
    }

    fn get_json<T: for<'de> Deserialize<'de>>(&self, url: &str, query: &[(&str, &str)]) -> Result<T, FetchError> {
        self.limiter.acquire();
        let mut req = self.agent.get(url);
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        let mut resp = req.call().map_err(classify)?;
        resp.body_mut()
            .read_json::<T>()
            .map_err(|e| FetchError::Permanent(format!("bad JSON from {url}: {e}")))
    }

    fn find(&self, imdb_id: &str) -> Result<FindResponse, FetchError> {
        self.get_json(
            &format!("{TMDB_API}/find/{imdb_id}"),
            &[("api_key", &self.config.tmdb_api_key), ("external_source", "imdb_id")],
        )
    }

    fn tmdb_images(entries: Vec<ImageEntry>) -> Vec<RemoteImage> {
        entries
            .into_iter()
            .map(|e| RemoteImage {
                id: image_id(&e.file_path),
                url: format!("{TMDB_IMAGES}{}", e.file_path),
            })
            .collect()
    }
}

impl MetadataClient for LiveClient {
    fn movie_posters(&self, movie_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        match source {
            PosterSource::ImdbMain => {
                let Some(key) = &self.config.omdb_api_key else {
                    return Err(FetchError::NotFound);
                };
                let title: OmdbTitle = self.get_json(OMDB_API, &[("i", movie_id), ("apikey", key)])?;
                match title.poster {
                    Some(url) if title.response == "True" && url.starts_with("http") => Ok(vec![RemoteImage {
                        id: movie_id.to_string(),
                        url,
                    }]),
                    _ => Err(FetchError::NotFound),
                }
            }
            PosterSource::Tmdb => {
                let found = self.find(movie_id)?;
                let movie = found.movie_results.first().ok_or(FetchError::NotFound)?;
                let images: MovieImages = self.get_json(
                    &format!("{TMDB_API}/movie/{}/images", movie.id),
                    &[("api_key", &self.config.tmdb_api_key)],
                )?;
                Ok(Self::tmdb_images(images.posters))
            }
        }
    }

    fn actor_images(&self, actor_id: &str, source: PosterSource) -> Result<Vec<RemoteImage>, FetchError> {
        match source {
            // OMDb has no person endpoint; IMDb pictures come through TMDB's mirror.
            PosterSource::ImdbMain => Err(FetchError::NotFound),
            PosterSource::Tmdb => {
                let found = self.find(actor_id)?;
                let person = found.person_results.first().ok_or(FetchError::NotFound)?;
                let images: PersonImages = self.get_json(
                    &format!("{TMDB_API}/person/{}/images", person.id),
                    &[("api_key", &self.config.tmdb_api_key)],
                )?;
                Ok(Self::tmdb_images(images.profiles))
            }
        }
    }

    fn movie_language(&self, movie_id: &str) -> Result<Option<String>, FetchError> {
        let found = self.find(movie_id)?;
        Ok(found.movie_results.first().and_then(|m| m.original_language.clone()))
    }

    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.limiter.acquire();
        let mut resp = self.agent.get(url).call().map_err(classify)?;
        resp.body_mut()
            .with_config()
            .limit(MAX_IMAGE_BYTES)
            .read_to_vec()
            .map_err(classify)
    }
}
