//! Poster faces matched to cast members, and per-actor ethnicity votes.

mod evaluate;
mod index;
mod matching;
mod vote;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use evaluate::{evaluate_matching, MatchingReport, TruthLabel};
pub use index::{build_index, ActorIndex, CastEmbeddings, IndexEntry, IndexScope, DEFAULT_TOP_K};
pub use matching::{match_face, MatchResult, DEFAULT_ACCEPT_THRESHOLD, DEFAULT_CONFIDENCE_FLOOR};
pub use vote::{argmax_with_ties, vote_ethnicity, vote_raw, ActorEthnicity, Vote, VoteError, TIE_RELATIVE_EPSILON};

use crate::ethnicity::EthnicityModel;
use crate::gateway::{Bundle, EthnicityScores, FaceEmbedding};
use crate::ingestion::{ActorProfileRaw, MovieRecord, PosterRef};

/// Image reference of an actor profile picture in inference manifests.
pub fn actor_image_ref(actor_id: &str, path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    format!("actor:{actor_id}:{stem}")
}

/// The single face kept from one profile picture.
#[derive(Debug, Clone)]
pub struct ProfileFace {
    pub ordinal: u32,
    pub image_ref: String,
    pub face_index: u32,
    pub embedding: Option<FaceEmbedding>,
    pub scores: Option<EthnicityScores>,
}

/// Per actor, the most confident face above `confidence_floor` in each profile picture.
pub fn select_profile_faces(
    actors: &[ActorProfileRaw],
    bundle: &Bundle,
    confidence_floor: f64,
) -> BTreeMap<String, Vec<ProfileFace>> {
    let embeddings = bundle.embedding_map();
    let scores = bundle.score_map();
    let mut out = BTreeMap::new();
    for actor in actors {
        let mut faces = Vec::new();
        for (ordinal, path) in actor.image_paths.iter().enumerate() {
            let image_ref = actor_image_ref(&actor.actor_id, path);
            let Some(det) = bundle.detections_for(&image_ref) else { continue };
            // highest confidence, then largest box, then lowest index
            let best = det
                .faces
                .iter()
                .filter(|f| f.confidence >= confidence_floor)
                .min_by(|a, b| {
                    b.confidence
                        .total_cmp(&a.confidence)
                        .then(b.bbox.area().total_cmp(&a.bbox.area()))
                        .then(a.face_index.cmp(&b.face_index))
                });
            if let Some(face) = best {
                let key = (image_ref.as_str(), face.face_index);
                faces.push(ProfileFace {
                    ordinal: ordinal as u32,
                    face_index: face.face_index,
                    embedding: embeddings.get(&key).map(|e| (*e).clone()),
                    scores: scores.get(&key).map(|s| (*s).clone()),
                    image_ref,
                });
            }
        }
        out.insert(actor.actor_id.clone(), faces);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub scope: IndexScope,
    pub accept_threshold: f64,
    pub confidence_floor: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            scope: IndexScope::WholeCast,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub posters: usize,
    pub faces_seen: usize,
    pub faces_below_floor: usize,
    pub faces_without_embedding: usize,
    pub matched: usize,
    /// Cast members left out of some movie index because they had no usable embedding.
    pub cast_without_embedding: usize,
}

pub fn movie_index(movie: &MovieRecord, profiles: &BTreeMap<String, Vec<ProfileFace>>, scope: IndexScope) -> ActorIndex {
    let cast: Vec<CastEmbeddings> = movie
        .cast
        .iter()
        .map(|c| CastEmbeddings {
            actor_id: c.actor_id.clone(),
            rank: c.rank,
            embeddings: profiles
                .get(&c.actor_id)
                .into_iter()
                .flatten()
                .filter_map(|f| f.embedding.clone().map(|e| (f.ordinal, e)))
                .collect(),
        })
        .collect();
    build_index(&cast, scope)
}

/// Match every confident poster face against its own movie's cast. Output follows `posters` order.
pub fn match_posters(
    movies: &[MovieRecord],
    posters: &[PosterRef],
    bundle: &Bundle,
    profiles: &BTreeMap<String, Vec<ProfileFace>>,
    opts: &MatchOptions,
) -> (Vec<MatchResult>, MatchStats) {
    let by_id: HashMap<&str, &MovieRecord> = movies.iter().map(|m| (m.movie_id.as_str(), m)).collect();
    let mut movie_ids: Vec<&str> = posters.iter().map(|p| p.movie_id.as_str()).collect();
    movie_ids.sort_unstable();
    movie_ids.dedup();
    let indexes: HashMap<&str, ActorIndex> = movie_ids
        .par_iter()
        .filter_map(|id| by_id.get(id).map(|m| (*id, movie_index(m, profiles, opts.scope))))
        .collect();
    let embeddings = bundle.embedding_map();
    let empty = build_index(&[], opts.scope);

    let per_poster: Vec<(Vec<MatchResult>, MatchStats)> = posters
        .par_iter()
        .map(|poster| {
            let mut stats = MatchStats { posters: 1, ..Default::default() };
            let mut results = Vec::new();
            let Some(det) = bundle.detections_for(&poster.poster_id) else {
                return (results, stats);
            };
            let index = indexes.get(poster.movie_id.as_str()).unwrap_or(&empty);
            for face in &det.faces {
                stats.faces_seen += 1;
                if face.confidence < opts.confidence_floor {
                    stats.faces_below_floor += 1;
                    continue;
                }
                let Some(emb) = embeddings.get(&(poster.poster_id.as_str(), face.face_index)) else {
                    stats.faces_without_embedding += 1;
                    continue;
                };
                let m = match_face(&poster.poster_id, face.face_index, emb, index, opts.accept_threshold);
                stats.matched += m.is_accepted() as usize;
                results.push(m);
            }
            (results, stats)
        })
        .collect();

    let mut stats = MatchStats {
        cast_without_embedding: indexes.values().map(|i| i.omitted().len()).sum(),
        ..Default::default()
    };
    let mut all = Vec::new();
    for (r, s) in per_poster {
        all.extend(r);
        stats.posters += s.posters;
        stats.faces_seen += s.faces_seen;
        stats.faces_below_floor += s.faces_below_floor;
        stats.faces_without_embedding += s.faces_without_embedding;
        stats.matched += s.matched;
    }
    (all, stats)
}

/// Vote every actor; actors without usable scores come out as unknown.
pub fn vote_actors(
    actors: &[ActorProfileRaw],
    profiles: &BTreeMap<String, Vec<ProfileFace>>,
    model: EthnicityModel,
) -> Result<Vec<ActorEthnicity>, VoteError> {
    let mut ids: Vec<&str> = actors.iter().map(|a| a.actor_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let scores: Vec<&EthnicityScores> = profiles
                .get(id)
                .into_iter()
                .flatten()
                .filter_map(|f| f.scores.as_ref())
                .collect();
            ActorEthnicity::from_scores(id, model, &scores)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ethnicity::Ethnicity;
    use crate::gateway::mock::{ImagePlan, MockBackend, PlantedFace};
    use crate::gateway::{BBox, InferenceRequest, ManifestEntry};
    use crate::ingestion::{CastMember, PosterSource};
    use std::path::PathBuf;

    fn face(identity: &str, confidence: f64) -> PlantedFace {
        PlantedFace {
            identity: identity.into(),
            bbox: BBox::new(10.0, 10.0, 20.0, 20.0),
            category: Ethnicity::Black,
            concentration: 0.9,
            confidence,
        }
    }

    #[test]
    fn end_to_end_on_mock_bundle() {
        let actors: Vec<ActorProfileRaw> = ["nm1", "nm2"]
            .iter()
            .map(|id| ActorProfileRaw {
                actor_id: id.to_string(),
                name: id.to_string(),
                image_paths: vec![PathBuf::from(format!("/x/{id}_0.png")), PathBuf::from(format!("/x/{id}_1.png"))],
            })
            .collect();
        let mut plan = BTreeMap::new();
        for a in &actors {
            for p in &a.image_paths {
                plan.insert(
                    actor_image_ref(&a.actor_id, p),
                    ImagePlan { size: Some((100, 100)), faces: vec![face(&a.actor_id, 0.99), face("stranger", 0.95)] },
                );
            }
        }
        plan.insert(
            "imdb:p1".into(),
            ImagePlan { size: Some((100, 100)), faces: vec![face("nm2", 0.99), face("extra", 0.99), face("nm1", 0.5)] },
        );
        let entries: Vec<ManifestEntry> = plan
            .keys()
            .map(|k| ManifestEntry { image_ref: k.clone(), path: PathBuf::from("/unused") })
            .collect();
        let bundle = MockBackend::new(7, plan).infer(&entries, &InferenceRequest::default()).unwrap();
        let profiles = select_profile_faces(&actors, &bundle, 0.9);
        assert!(profiles.values().all(|f| f.len() == 2 && f.iter().all(|x| x.face_index == 0)));

        let movie = MovieRecord {
            movie_id: "tt1".into(),
            title: "T".into(),
            year: 2000,
            genres: Default::default(),
            is_animated: false,
            num_votes: 5000,
            avg_rating: 7.0,
            original_language: None,
            cast: vec![CastMember { actor_id: "nm1".into(), rank: 1 }, CastMember { actor_id: "nm2".into(), rank: 2 }],
        };
        let poster = PosterRef {
            poster_id: "imdb:p1".into(),
            movie_id: "tt1".into(),
            source: PosterSource::ImdbMain,
            image_path: PathBuf::from("/unused"),
            width: 100,
            height: 100,
        };
        let (matches, stats) = match_posters(&[movie], &[poster], &bundle, &profiles, &MatchOptions::default());
        assert_eq!(stats.faces_below_floor, 1);
        assert_eq!(matches.len(), 2);
        assert_eq!(matches[0].actor_id.as_deref(), Some("nm2"));
        assert_eq!(matches[1].actor_id, None);

        let votes = vote_actors(&actors, &profiles, EthnicityModel::FourClass).unwrap();
        assert!(votes.iter().all(|v| v.voted == Some(Ethnicity::Black) && v.images_used == 2));
    }

    #[test]
    fn actor_refs_use_file_stem() {
        assert_eq!(actor_image_ref("nm9", Path::new("/a/b/nm9_2.jpg")), "actor:nm9:nm9_2");
    }
}
