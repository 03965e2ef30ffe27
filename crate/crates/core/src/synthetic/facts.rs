use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ethnicity::{Ethnicity, EthnicityModel};
use crate::gateway::BBox;
use crate::metrics::{FaceFact, LanguageClass};

const GENRES: [&str; 5] = ["Action", "Comedy", "Drama", "Horror", "Romance"];
const DECADES: [i32; 4] = [1980, 1990, 2000, 2010];

#[derive(Debug, Clone)]
pub struct FactOptions {
    pub movies: usize,
    pub posters_per_movie: usize,
    pub faces_per_poster: usize,
    pub cast_size: usize,
    /// Size of the shared actor pool; actors recur across movies.
    pub actor_pool: usize,
    pub model: EthnicityModel,
    pub seed: u64,
}

impl Default for FactOptions {
    fn default() -> Self {
        FactOptions {
            movies: 12,
            posters_per_movie: 2,
            faces_per_poster: 3,
            cast_size: 6,
            actor_pool: 40,
            model: EthnicityModel::FourClass,
            seed: 5,
        }
    }
}

/// Random facts that are internally consistent. An actor keeps one ethnicity
/// everywhere and one rank within a movie; movie attributes are shared by its facts.
pub fn random_facts(opts: &FactOptions) -> Vec<FaceFact> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cats = opts.model.categories();
    let ethnicity: Vec<Ethnicity> = (0..opts.actor_pool).map(|_| *cats.choose(&mut rng).unwrap()).collect();
    let (w, h) = (400u32, 600u32);
    let mut facts = Vec::new();
    for m in 0..opts.movies {
        let movie_id = format!("tt{:07}", 9001 + m);
        let decade = DECADES[rng.random_range(0..DECADES.len())];
        let n_genres = rng.random_range(1..=2);
        let genres: BTreeSet<String> = GENRES.choose_multiple(&mut rng, n_genres).map(|g| g.to_string()).collect();
        let language_class = if rng.random_bool(0.75) { LanguageClass::English } else { LanguageClass::NonEnglish };
        let cast: Vec<usize> = rand::seq::index::sample(&mut rng, opts.actor_pool, opts.cast_size.min(opts.actor_pool)).into_vec();
        for p in 0..opts.posters_per_movie {
            let poster_id = format!("{movie_id}-p{p}");
            let n_faces = rng.random_range(1..=opts.faces_per_poster.max(1)).min(cast.len());
            let on_poster = rand::seq::index::sample(&mut rng, cast.len(), n_faces).into_vec();
            let boxes: Vec<BBox> = (0..n_faces)
                .map(|_| {
                    let side = rng.random_range(20..=160) as f64;
                    let x = rng.random_range(0.0..(w as f64 - side));
                    let y = rng.random_range(0.0..(h as f64 - side));
                    BBox::new(x, y, side, side)
                })
                .collect();
            // an unmatched face may be the largest on the poster
            let largest = boxes.iter().map(BBox::area).fold(0.0, f64::max).max(rng.random_range(0.0..40000.0));
            for (face_index, (slot, bbox)) in on_poster.iter().zip(boxes).enumerate() {
                let actor = cast[*slot];
                facts.push(FaceFact {
                    movie_id: movie_id.clone(),
                    poster_id: poster_id.clone(),
                    face_index: face_index as u32,
                    actor_id: format!("nm{:07}", 1 + actor),
                    ethnicity: ethnicity[actor],
                    bbox,
                    poster_width: w,
                    poster_height: h,
                    largest_face_area: largest,
                    cast_rank: *slot as u32 + 1,
                    decade,
                    genres: genres.clone(),
                    language_class,
                });
            }
        }
    }
    facts
}
