use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::images::{color_portrait, encode_png, gray_portrait, render_poster, PosterDesign};
use crate::error::Result;
use crate::ethnicity::Ethnicity;
use crate::gateway::mock::{IdentityPlan, ImagePlan, PlantedFace};
use crate::gateway::BBox;
use crate::identity::{actor_image_ref, TruthLabel};
use crate::ingestion::{Cassette, CassetteResponse, PosterSource, RemoteImage};
use crate::io::{write_atomic, write_json, write_jsonl};

pub const POSTER_WIDTH: u32 = 90;
pub const POSTER_HEIGHT: u32 = 120;
pub const PORTRAIT_WIDTH: u32 = 40;
pub const PORTRAIT_HEIGHT: u32 = 50;
const GENRES: [&str; 6] = ["Drama", "Action", "Comedy", "Crime", "Romance", "Thriller"];

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub movies: usize,
    pub cast_size: usize,
    pub actor_pool: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            movies: 10,
            cast_size: 8,
            actor_pool: 30,
            seed: 7,
        }
    }
}

/// Where a generated corpus landed.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub root: PathBuf,
    pub dump_dir: PathBuf,
    pub cassette_dir: PathBuf,
    pub plan_path: PathBuf,
    pub truth_path: PathBuf,
    pub config_path: PathBuf,
    pub seed: u64,
}

pub const DUMP_DIR: &str = "dump";
pub const CASSETTE_DIR: &str = "cassette";
pub const PLAN_FILE: &str = "plan.json";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const CONFIG_FILE: &str = "posterlens.toml";

pub fn movie_id(i: usize) -> String {
    format!("tt{:07}", 101 + i)
}

pub fn actor_id(j: usize) -> String {
    format!("nm{:07}", 1 + j)
}

/// Planted ethnicity of pool actor `j`.
pub fn planted_ethnicity(j: usize) -> Ethnicity {
    match j % 10 {
        7 => Ethnicity::Black,
        8 => Ethnicity::Asian,
        9 => Ethnicity::Indian,
        _ => Ethnicity::White,
    }
}

/// Pool actors with no profile pictures anywhere.
pub fn actor_has_no_images(j: usize) -> bool {
    j % 11 == 5
}

/// Pool actors whose first profile picture is grayscale.
pub fn actor_has_gray_image(j: usize) -> bool {
    j % 7 == 3
}

fn cast_of(movie: usize, opts: &SynthOptions) -> Vec<usize> {
    (0..opts.cast_size).map(|k| (movie * 3 + k) % opts.actor_pool).collect()
}

/// (design, variant, source, remote id) for each poster of a movie, IMDb main first.
fn poster_layout(movie: usize) -> Vec<(PosterDesign, u32, PosterSource, String)> {
    let d = |k: usize| PosterDesign::ALL[(movie + k) % PosterDesign::ALL.len()];
    vec![
        (d(0), 0, PosterSource::ImdbMain, format!("m{movie:03}main")),
        (d(0), 1, PosterSource::Tmdb, format!("m{movie:03}a")),
        (d(1), 0, PosterSource::Tmdb, format!("m{movie:03}b")),
        (d(1), 2, PosterSource::Tmdb, format!("m{movie:03}c")),
        (d(2), 0, PosterSource::Tmdb, format!("m{movie:03}d")),
    ]
}

fn url(kind: &str, id: &str) -> String {
    format!("synthetic://{kind}/{id}.png")
}

fn face_box(rng: &mut ChaCha8Rng, slot: usize) -> BBox {
    let cols = 3;
    let (cw, ch) = (POSTER_WIDTH as f64 / cols as f64, POSTER_HEIGHT as f64 / 3.0);
    let side = rng.random_range(8.0..cw - 2.0).floor();
    let x = (slot % cols) as f64 * cw + ((cw - side) / 2.0).floor();
    let y = (slot / cols % 3) as f64 * ch + ((ch - side) / 2.0).floor();
    BBox::new(x, y, side, side)
}

/// Write the planted 10-movie corpus: dump tables, cassette, mock plan, truth labels and a run config.
pub fn write_corpus(root: &Path, opts: &SynthOptions) -> Result<SynthCorpus> {
    let corpus = SynthCorpus {
        root: root.to_path_buf(),
        dump_dir: root.join(DUMP_DIR),
        cassette_dir: root.join(CASSETTE_DIR),
        plan_path: root.join(PLAN_FILE),
        truth_path: root.join(TRUTH_FILE),
        config_path: root.join(CONFIG_FILE),
        seed: opts.seed,
    };
    let cassette = Cassette::new(&corpus.cassette_dir);
    let mut plan = IdentityPlan::new();
    let mut truth = Vec::new();

    let mut basics = String::from("tconst\ttitleType\tprimaryTitle\toriginalTitle\tisAdult\tstartYear\tendYear\truntimeMinutes\tgenres\n");
    let mut ratings = String::from("tconst\taverageRating\tnumVotes\n");
    let mut principals = String::from("tconst\tordering\tnconst\tcategory\tjob\tcharacters\n");
    let mut names = String::from("nconst\tprimaryName\tbirthYear\tdeathYear\tprimaryProfession\tknownForTitles\n");

    for i in 0..opts.movies {
        let id = movie_id(i);
        let year = 1965 + 6 * i as i32;
        let genres = if i % 2 == 0 {
            GENRES[i % GENRES.len()].to_string()
        } else {
            format!("{},{}", GENRES[i % GENRES.len()], GENRES[(i + 2) % GENRES.len()])
        };
        let _ = writeln!(basics, "{id}\tmovie\tSynthetic Movie {i}\tSynthetic Movie {i}\t0\t{year}\t\\N\t100\t{genres}");
        let _ = writeln!(ratings, "{id}\t{:.1}\t{}", 5.0 + (i % 5) as f64 * 0.5, 5000 + 100 * i);
        let cast = cast_of(i, opts);
        for (k, j) in cast.iter().enumerate() {
            let category = if j % 2 == 0 { "actor" } else { "actress" };
            let _ = writeln!(principals, "{id}\t{}\t{}\t{category}\t\\N\t\\N", k + 1, actor_id(*j));
        }
        let _ = writeln!(principals, "{id}\t{}\tnm9999999\tdirector\t\\N\t\\N", cast.len() + 1);
        cassette.put_language(&id, Some(if i % 4 == 3 { "fr" } else { "en" }))?;

        let layout = poster_layout(i);
        let mut listings: BTreeMap<PosterSource, Vec<RemoteImage>> = BTreeMap::new();
        let mut design_faces: BTreeMap<usize, Vec<(Option<usize>, PlantedFace)>> = BTreeMap::new();
        for (design, variant, source, remote) in &layout {
            let bytes = encode_png(&render_poster(*design, *variant, [(i * 37 % 256) as u8, 90, 160], POSTER_WIDTH, POSTER_HEIGHT));
            let u = url("poster", remote);
            cassette.put_blob(&u, &bytes)?;
            listings.entry(*source).or_default().push(RemoteImage { id: remote.clone(), url: u });

            let design_idx = PosterDesign::ALL.iter().position(|d| d == design).unwrap();
            let faces = design_faces.entry(design_idx).or_insert_with(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((i as u64) << 8) ^ design_idx as u64);
                let n_cast = rng.random_range(1..=cast.len().min(6));
                let n_extra = rng.random_range(0..=2);
                let mut faces = Vec::new();
                let mut members: Vec<usize> = cast.clone();
                for k in 0..n_cast {
                    let pick = rng.random_range(0..members.len());
                    let j = members.swap_remove(pick);
                    faces.push((Some(j), PlantedFace {
                        identity: actor_id(j),
                        bbox: face_box(&mut rng, k),
                        category: planted_ethnicity(j),
                        concentration: 0.8,
                        confidence: 0.99,
                    }));
                }
                for e in 0..n_extra {
                    faces.push((None, PlantedFace {
                        identity: format!("extra:{id}:{design_idx}:{e}"),
                        bbox: face_box(&mut rng, n_cast + e),
                        category: Ethnicity::White,
                        concentration: 0.8,
                        confidence: 0.97,
                    }));
                }
                // a blurry background face below the confidence floor
                faces.push((None, PlantedFace {
                    identity: format!("blur:{id}:{design_idx}"),
                    bbox: BBox::new(1.0, 1.0, 6.0, 6.0),
                    category: Ethnicity::White,
                    concentration: 0.5,
                    confidence: 0.4,
                }));
                faces
            });
            let poster_id = format!("{}:{remote}", source.key());
            for (face_index, (actor, face)) in faces.iter().enumerate() {
                if face.confidence >= 0.9 {
                    truth.push(TruthLabel {
                        poster_id: poster_id.clone(),
                        face_index: face_index as u32,
                        actor_id: actor.map(actor_id),
                    });
                }
            }
            plan.insert(poster_id, ImagePlan { size: None, faces: faces.iter().map(|(_, f)| f.clone()).collect() });
        }
        for (source, images) in listings {
            cassette.put_posters(&id, source, &CassetteResponse::Images { images })?;
        }
    }

    // movies the filter must drop, plus one unparseable line
    let _ = writeln!(basics, "tt0009001\tmovie\tSynthetic Cartoon\tSynthetic Cartoon\t0\t1999\t\\N\t80\tAnimation,Comedy");
    let _ = writeln!(ratings, "tt0009001\t7.0\t9000");
    let _ = writeln!(basics, "tt0009002\tmovie\tObscure Movie\tObscure Movie\t0\t2004\t\\N\t90\tDrama");
    let _ = writeln!(ratings, "tt0009002\t6.0\t12");
    let _ = writeln!(basics, "tt0009003\ttvSeries\tSynthetic Show\tSynthetic Show\t0\t2010\t2012\t45\tDrama");
    let _ = writeln!(ratings, "tt0009003\t8.0\t20000");
    let _ = writeln!(basics, "tt0009004\tmovie\tBroken Line\t0\t1999");

    for j in 0..opts.actor_pool {
        let a = actor_id(j);
        let _ = writeln!(names, "{a}\tPlanted Actor {j}\t\\N\t\\N\tactor\t\\N");
        cassette.put_actor_images(&a, PosterSource::ImdbMain, &CassetteResponse::NotFound)?;
        if actor_has_no_images(j) {
            cassette.put_actor_images(&a, PosterSource::Tmdb, &CassetteResponse::NotFound)?;
            continue;
        }
        let mut images = Vec::new();
        for k in 0..3 {
            let remote = format!("p{j:03}{}", (b'a' + k as u8) as char);
            let seed = opts.seed.wrapping_mul(1000) + (j * 3 + k) as u64;
            let img = if k == 0 && actor_has_gray_image(j) {
                gray_portrait(seed, PORTRAIT_WIDTH, PORTRAIT_HEIGHT)
            } else {
                color_portrait(seed, PORTRAIT_WIDTH, PORTRAIT_HEIGHT)
            };
            let u = url("actor", &remote);
            cassette.put_blob(&u, &encode_png(&img))?;
            images.push(RemoteImage { id: remote.clone(), url: u });
            let image_ref = actor_image_ref(&a, Path::new(&format!("{remote}.png")));
            let mut faces = vec![PlantedFace {
                identity: a.clone(),
                bbox: BBox::new(8.0, 8.0, 24.0, 28.0),
                category: planted_ethnicity(j),
                concentration: 0.75,
                confidence: 0.995,
            }];
            if k == 1 {
                faces.push(PlantedFace {
                    identity: format!("bystander:{a}"),
                    bbox: BBox::new(30.0, 2.0, 8.0, 8.0),
                    category: Ethnicity::White,
                    concentration: 0.6,
                    confidence: 0.93,
                });
            }
            plan.insert(image_ref, ImagePlan { size: None, faces });
        }
        cassette.put_actor_images(&a, PosterSource::Tmdb, &CassetteResponse::Images { images })?;
    }

    write_atomic(&corpus.dump_dir.join("title.basics.tsv"), basics.as_bytes())?;
    write_atomic(&corpus.dump_dir.join("title.ratings.tsv"), ratings.as_bytes())?;
    write_atomic(&corpus.dump_dir.join("title.principals.tsv"), principals.as_bytes())?;
    write_atomic(&corpus.dump_dir.join("name.basics.tsv"), names.as_bytes())?;
    write_json(&corpus.plan_path, &plan)?;
    write_jsonl(&corpus.truth_path, &truth)?;
    write_atomic(&corpus.config_path, default_config(opts.seed).as_bytes())?;
    Ok(corpus)
}

/// Run config that points at the corpus files next to it.
pub fn default_config(seed: u64) -> String {
    format!(
        r#"[paths]
movie_dump = "{DUMP_DIR}"
out_dir = "out"

[ingest]
source = "replay"
cassette = "{CASSETTE_DIR}"
min_votes = 1000
exclude_animated = true

[dedup]
threshold = 16

[grayscale]
tolerance = 10.0

[inference]
backend = "mock"
mock_plan = "{PLAN_FILE}"
mock_seed = {seed}
ethnicity_model = "four"

[matching]
scope = "whole"
top_k = 10
accept_threshold = 1.0
confidence_floor = 0.9

[analyze]
language = "all"
"#
    )
}
