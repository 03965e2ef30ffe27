use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Earliest year a film can carry.
pub const MIN_YEAR: i32 = 1888;

/// One credited cast member of a movie.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CastMember {
    pub actor_id: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: String,
    pub title: String,
    pub year: i32,
    pub genres: BTreeSet<String>,
    pub is_animated: bool,
    pub num_votes: u64,
    pub avg_rating: f64,
    pub original_language: Option<String>,
    pub cast: Vec<CastMember>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("year {year} outside [{MIN_YEAR}, {max}]")]
    Year { year: i32, max: i32 },
    #[error("average rating {0} outside [0, 10]")]
    Rating(String),
    #[error("cast ranks must be unique and contiguous from 1, got {0:?}")]
    CastRanks(Vec<u32>),
    #[error("empty movie id")]
    EmptyId,
}

impl MovieRecord {
    pub fn is_english(&self) -> bool {
        self.original_language.as_deref() == Some("en")
    }

    pub fn rank_of(&self, actor_id: &str) -> Option<u32> {
        self.cast.iter().find(|c| c.actor_id == actor_id).map(|c| c.rank)
    }

    /// Check the record invariants; `max_year` is usually the current year plus two.
    pub fn validate(&self, max_year: i32) -> Result<(), RecordError> {
        if self.movie_id.is_empty() {
            return Err(RecordError::EmptyId);
        }
        if self.year < MIN_YEAR || self.year > max_year {
            return Err(RecordError::Year {
                year: self.year,
                max: max_year,
            });
        }
        if !(0.0..=10.0).contains(&self.avg_rating) {
            return Err(RecordError::Rating(self.avg_rating.to_string()));
        }
        let mut ranks: Vec<u32> = self.cast.iter().map(|c| c.rank).collect();
        ranks.sort_unstable();
        if ranks.iter().enumerate().any(|(i, r)| *r != i as u32 + 1) {
            return Err(RecordError::CastRanks(self.cast.iter().map(|c| c.rank).collect()));
        }
        Ok(())
    }
}

/// Where a poster came from. Declaration order is the keep priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PosterSource {
    ImdbMain,
    Tmdb,
}

impl PosterSource {
    pub const ALL: [PosterSource; 2] = [PosterSource::ImdbMain, PosterSource::Tmdb];

    pub fn key(self) -> &'static str {
        match self {
            PosterSource::ImdbMain => "imdb",
            PosterSource::Tmdb => "tmdb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosterRef {
    pub poster_id: String,
    pub movie_id: String,
    pub source: PosterSource,
    pub image_path: PathBuf,
    pub width: u32,
    pub height: u32,
}

/// Actor with up to [`MAX_PROFILE_IMAGES`] profile pictures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorProfileRaw {
    pub actor_id: String,
    pub name: String,
    pub image_paths: Vec<PathBuf>,
}

pub const MAX_PROFILE_IMAGES: usize = 3;
