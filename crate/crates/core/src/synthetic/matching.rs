use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ethnicity::Ethnicity;
use crate::gateway::mock::{IdentityPlan, ImagePlan, PlantedFace};
use crate::gateway::{BBox, ManifestEntry};
use crate::identity::{actor_image_ref, TruthLabel};
use crate::ingestion::{ActorProfileRaw, CastMember, MovieRecord, PosterRef, PosterSource};

#[derive(Debug, Clone)]
pub struct MatchingCorpusOptions {
    pub movies: usize,
    /// Credited cast members who may appear on posters.
    pub cast_size: usize,
    pub posters_per_movie: usize,
    pub faces_per_poster: usize,
    /// Fraction of poster faces that are uncredited extras.
    pub extras_fraction: f64,
    /// Pad each cast with this many credited non-appearing members and shuffle ranks,
    /// so some on-poster actors land beyond the top ranks.
    pub scramble_extra_cast: usize,
    pub profile_images: usize,
    pub seed: u64,
}

impl Default for MatchingCorpusOptions {
    fn default() -> Self {
        MatchingCorpusOptions {
            movies: 50,
            cast_size: 10,
            posters_per_movie: 2,
            faces_per_poster: 10,
            extras_fraction: 0.3,
            scramble_extra_cast: 0,
            profile_images: 2,
            seed: 11,
        }
    }
}

/// In-memory planted corpus for matching experiments. Image sizes come from the plan.
#[derive(Debug, Clone)]
pub struct MatchingCorpus {
    pub movies: Vec<MovieRecord>,
    pub posters: Vec<PosterRef>,
    pub actors: Vec<ActorProfileRaw>,
    pub plan: IdentityPlan,
    pub truth: Vec<TruthLabel>,
}

impl MatchingCorpus {
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.plan
            .keys()
            .map(|k| ManifestEntry {
                image_ref: k.clone(),
                path: PathBuf::from(format!("/planted/{}", k.replace(':', "_"))),
            })
            .collect()
    }

    /// Share of planted poster faces that belong to a credited cast member.
    pub fn planted_availability(&self) -> f64 {
        let known = self.truth.iter().filter(|t| t.actor_id.is_some()).count();
        known as f64 / self.truth.len().max(1) as f64
    }
}

const CATEGORIES: [Ethnicity; 4] = [Ethnicity::White, Ethnicity::Black, Ethnicity::Asian, Ethnicity::Indian];

pub fn matching_corpus(opts: &MatchingCorpusOptions) -> MatchingCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (w, h) = (600u32, 900u32);
    let mut out = MatchingCorpus {
        movies: Vec::new(),
        posters: Vec::new(),
        actors: Vec::new(),
        plan: IdentityPlan::new(),
        truth: Vec::new(),
    };
    let extras = (opts.faces_per_poster as f64 * opts.extras_fraction).round() as usize;
    let on_poster = opts.faces_per_poster - extras;
    for m in 0..opts.movies {
        let movie_id = format!("tt{:07}", 500 + m);
        let appearing: Vec<String> = (0..opts.cast_size).map(|k| format!("nm{m:03}{k:03}")).collect();
        let mut credited = appearing.clone();
        credited.extend((0..opts.scramble_extra_cast).map(|k| format!("nm{m:03}x{k:02}")));
        if opts.scramble_extra_cast > 0 {
            // non-appearing members take the top ranks first, then the rest shuffle
            let (head, tail) = credited.split_at_mut(opts.cast_size);
            head.shuffle(&mut rng);
            tail.shuffle(&mut rng);
            let pads: Vec<String> = tail.to_vec();
            let rest: Vec<String> = head.to_vec();
            credited = pads.into_iter().chain(rest).collect();
            let half = opts.scramble_extra_cast / 2;
            credited[half..].shuffle(&mut rng);
        }
        out.movies.push(MovieRecord {
            movie_id: movie_id.clone(),
            title: format!("Planted {m}"),
            year: 1960 + (m as i32 % 60),
            genres: ["Drama".to_string()].into(),
            is_animated: false,
            num_votes: 10_000,
            avg_rating: 6.5,
            original_language: Some("en".into()),
            cast: credited
                .iter()
                .enumerate()
                .map(|(i, a)| CastMember { actor_id: a.clone(), rank: i as u32 + 1 })
                .collect(),
        });
        for actor in &credited {
            let category = CATEGORIES[rng.random_range(0..CATEGORIES.len())];
            let paths: Vec<PathBuf> = (0..opts.profile_images)
                .map(|k| PathBuf::from(format!("/planted/{actor}_{k}.png")))
                .collect();
            for p in &paths {
                out.plan.insert(
                    actor_image_ref(actor, p),
                    ImagePlan {
                        size: Some((200, 250)),
                        faces: vec![PlantedFace {
                            identity: actor.clone(),
                            bbox: BBox::new(50.0, 50.0, 100.0, 120.0),
                            category,
                            concentration: 0.85,
                            confidence: 0.99,
                        }],
                    },
                );
            }
            out.actors.push(ActorProfileRaw { actor_id: actor.clone(), name: actor.clone(), image_paths: paths });
        }
        for p in 0..opts.posters_per_movie {
            let poster_id = format!("tmdb:{movie_id}p{p}");
            let mut faces = Vec::new();
            let mut shown = appearing.clone();
            shown.shuffle(&mut rng);
            for (k, actor) in shown.iter().take(on_poster).enumerate() {
                faces.push((Some(actor.clone()), k));
            }
            for e in 0..extras {
                faces.push((None, on_poster + e));
            }
            let planted: Vec<PlantedFace> = faces
                .iter()
                .enumerate()
                .map(|(face_index, (actor, slot))| {
                    out.truth.push(TruthLabel {
                        poster_id: poster_id.clone(),
                        face_index: face_index as u32,
                        actor_id: actor.clone(),
                    });
                    PlantedFace {
                        identity: actor.clone().unwrap_or_else(|| format!("extra:{poster_id}:{slot}")),
                        bbox: BBox::new((slot % 5) as f64 * 110.0 + 10.0, (slot / 5) as f64 * 200.0 + 10.0, 90.0, 100.0),
                        category: Ethnicity::White,
                        concentration: 0.8,
                        confidence: 0.99,
                    }
                })
                .collect();
            out.plan.insert(poster_id.clone(), ImagePlan { size: Some((w, h)), faces: planted });
            out.posters.push(PosterRef {
                poster_id,
                movie_id: movie_id.clone(),
                source: PosterSource::Tmdb,
                image_path: PathBuf::from("/planted/poster.png"),
                width: w,
                height: h,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn availability_matches_extras_fraction() {
        let c = matching_corpus(&MatchingCorpusOptions { movies: 3, ..Default::default() });
        assert!((c.planted_availability() - 0.7).abs() < 1e-12);
        assert_eq!(c.movies[0].cast.len(), 10);
    }

    #[test]
    fn scrambling_pushes_appearing_actors_down_the_ranks() {
        let c = matching_corpus(&MatchingCorpusOptions { movies: 5, scramble_extra_cast: 10, ..Default::default() });
        let deep = c.movies.iter().flat_map(|m| m.cast.iter()).filter(|c| !c.actor_id.contains('x') && c.rank > 10).count();
        assert!(deep > 0);
        assert_eq!(c.movies[0].cast.len(), 20);
    }
}
