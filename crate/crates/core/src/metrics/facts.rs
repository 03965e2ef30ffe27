use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::demographics::decade_of;
use crate::ethnicity::Ethnicity;
use crate::gateway::{BBox, Bundle};
use crate::identity::{ActorEthnicity, MatchResult};
use crate::ingestion::{MovieRecord, PosterRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LanguageClass {
    English,
    NonEnglish,
}

/// One matched, ethnicity-resolved poster face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceFact {
    pub movie_id: String,
    pub poster_id: String,
    pub face_index: u32,
    pub actor_id: String,
    pub ethnicity: Ethnicity,
    pub bbox: BBox,
    pub poster_width: u32,
    pub poster_height: u32,
    /// Area of the largest confident face detected on the poster, matched or not.
    pub largest_face_area: f64,
    pub cast_rank: u32,
    pub decade: i32,
    pub genres: BTreeSet<String>,
    pub language_class: LanguageClass,
}

impl FaceFact {
    pub fn sort_key(&self) -> (&str, &str, u32) {
        (&self.movie_id, &self.poster_id, self.face_index)
    }
}

/// Where faces were lost between detection and facts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactsCoverage {
    pub posters: usize,
    pub posters_without_faces: usize,
    pub faces_detected: usize,
    pub faces_unmatched: usize,
    pub faces_ethnicity_unknown: usize,
    pub faces_without_rank: usize,
    pub facts: usize,
    pub movies_with_posters: usize,
    pub movies_with_facts: usize,
}

pub fn language_class(movie: &MovieRecord) -> LanguageClass {
    if movie.is_english() {
        LanguageClass::English
    } else {
        LanguageClass::NonEnglish
    }
}

/// One fact per accepted match with a voted actor, in poster then face order.
pub fn build_facts(
    movies: &[MovieRecord],
    posters: &[PosterRef],
    bundle: &Bundle,
    matches: &[MatchResult],
    votes: &[ActorEthnicity],
    confidence_floor: f64,
) -> (Vec<FaceFact>, FactsCoverage) {
    let movie_by_id: HashMap<&str, &MovieRecord> = movies.iter().map(|m| (m.movie_id.as_str(), m)).collect();
    let vote_by_id: HashMap<&str, Option<Ethnicity>> = votes.iter().map(|v| (v.actor_id.as_str(), v.voted)).collect();
    let match_by_face: HashMap<(&str, u32), &MatchResult> =
        matches.iter().map(|m| ((m.poster_id.as_str(), m.face_index), m)).collect();

    let mut cov = FactsCoverage::default();
    let mut facts = Vec::new();
    let mut with_posters = BTreeSet::new();
    let mut with_facts = BTreeSet::new();
    for poster in posters {
        let Some(movie) = movie_by_id.get(poster.movie_id.as_str()) else { continue };
        cov.posters += 1;
        with_posters.insert(movie.movie_id.as_str());
        let Some(det) = bundle.detections_for(&poster.poster_id) else {
            cov.posters_without_faces += 1;
            continue;
        };
        let confident: Vec<_> = det.faces.iter().filter(|f| f.confidence >= confidence_floor).collect();
        if confident.is_empty() {
            cov.posters_without_faces += 1;
            continue;
        }
        let largest = confident.iter().map(|f| f.bbox.area()).fold(0.0, f64::max);
        for face in confident {
            cov.faces_detected += 1;
            let Some(actor) = match_by_face
                .get(&(poster.poster_id.as_str(), face.face_index))
                .and_then(|m| m.actor_id.as_deref())
            else {
                cov.faces_unmatched += 1;
                continue;
            };
            let Some(ethnicity) = vote_by_id.get(actor).copied().flatten() else {
                cov.faces_ethnicity_unknown += 1;
                continue;
            };
            let Some(rank) = movie.rank_of(actor) else {
                cov.faces_without_rank += 1;
                continue;
            };
            with_facts.insert(movie.movie_id.as_str());
            facts.push(FaceFact {
                movie_id: movie.movie_id.clone(),
                poster_id: poster.poster_id.clone(),
                face_index: face.face_index,
                actor_id: actor.to_string(),
                ethnicity,
                bbox: face.bbox,
                poster_width: det.width,
                poster_height: det.height,
                largest_face_area: largest,
                cast_rank: rank,
                decade: decade_of(movie.year),
                genres: movie.genres.clone(),
                language_class: language_class(movie),
            });
        }
    }
    cov.facts = facts.len();
    cov.movies_with_posters = with_posters.len();
    cov.movies_with_facts = with_facts.len();
    (facts, cov)
}
