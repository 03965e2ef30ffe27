//! Acceptance suite: one PASS/FAIL line per criterion, with pinned tolerances and time limits.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use image::{DynamicImage, Rgb, RgbImage};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use posterlens::demographics::{ratio_against, CensusCategory, CensusDistribution, CensusTable};
use posterlens::gateway::{BBox, EthnicityScores, InferenceRequest, MockBackend};
use posterlens::identity::{
    evaluate_matching, match_posters, select_profile_faces, vote_ethnicity, vote_raw, IndexScope, MatchOptions,
};
use posterlens::imageprep::{compute_dhash, dedup_posters, HashedPoster};
use posterlens::ingestion::{PosterRef, PosterSource};
use posterlens::metrics::{analyze, AnalyzeOptions, FaceFact, LanguageClass, MetricTable};
use posterlens::pipeline::{run_pipeline, Config, RunOptions};
use posterlens::synthetic::{
    matching_corpus, random_facts, render_poster, write_corpus, FactOptions, MatchingCorpusOptions, PosterDesign,
    SynthOptions,
};
use posterlens::{Ethnicity, EthnicityModel};

type Q = Ratio<i64>;

const METRIC_TOLERANCE: f64 = 1e-12;
const SLICE_TOLERANCE: f64 = 1e-9;
const IDENTIFICATION_TOLERANCE: f64 = 0.02;
const PARITY_TOLERANCE: f64 = 0.005;

// ---------------------------------------------------------------- dhash

fn oracle_luma(p: [u8; 3]) -> i64 {
    (299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64 + 500) / 1000
}

/// Pixel-centre bilinear sample position, clamped to the image.
fn oracle_sample(out: i64, out_len: i64, src_len: i64) -> (i64, i64, Q) {
    let pos = Q::new((2 * out + 1) * src_len, 2 * out_len) - Q::new(1, 2);
    let pos = if pos < Q::from_integer(0) { Q::from_integer(0) } else { pos };
    let i0 = pos.floor().to_integer().min(src_len - 1);
    let frac = if i0 == src_len - 1 { Q::from_integer(0) } else { pos - Q::from_integer(i0) };
    (i0, (i0 + 1).min(src_len - 1), frac)
}

fn oracle_dhash(img: &RgbImage) -> u64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let l = |x: i64, y: i64| Q::from_integer(oracle_luma(img.get_pixel(x as u32, y as u32).0));
    let mut grid = vec![vec![Q::from_integer(0); 9]; 8];
    for (row, cells) in grid.iter_mut().enumerate() {
        let (y0, y1, fy) = oracle_sample(row as i64, 8, h);
        for (col, cell) in cells.iter_mut().enumerate() {
            let (x0, x1, fx) = oracle_sample(col as i64, 9, w);
            let one = Q::from_integer(1);
            let top = l(x0, y0) * (one - fx) + l(x1, y0) * fx;
            let bottom = l(x0, y1) * (one - fx) + l(x1, y1) * fx;
            *cell = top * (one - fy) + bottom * fy;
        }
    }
    let mut bits = 0u64;
    for row in 0..8 {
        for col in 0..8 {
            if grid[row][col + 1] > grid[row][col] {
                bits |= 1 << (row * 8 + col);
            }
        }
    }
    bits
}

fn dhash_bit_exactness() -> Result<String, String> {
    let ramp = RgbImage::from_fn(9, 8, |x, _| Rgb([(20 * x + 10) as u8; 3]));
    let got = compute_dhash(&DynamicImage::ImageRgb8(ramp)).0;
    if got != u64::MAX {
        return Err(format!("ramp hash {got:016x}, want ffffffffffffffff"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let color = Rgb([rng.random(), rng.random(), rng.random()]);
        let solid = RgbImage::from_pixel(rng.random_range(1..50), rng.random_range(1..50), color);
        let got = compute_dhash(&DynamicImage::ImageRgb8(solid)).0;
        if got != 0 {
            return Err(format!("solid {color:?} hash {got:016x}, want 0"));
        }
    }
    for i in 0..20 {
        let (w, h) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let img = RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]));
        let got = compute_dhash(&DynamicImage::ImageRgb8(img.clone())).0;
        let want = oracle_dhash(&img);
        if got != want {
            return Err(format!("random image {i} ({w}x{h}): {got:016x} vs oracle {want:016x}"));
        }
    }
    Ok("ramp=all-ones, 5 solids=0, 20 random images match the rational oracle".into())
}

// ---------------------------------------------------------------- dedup

fn dedup_fixture() -> Result<String, String> {
    let designs = [PosterDesign::RampUp, PosterDesign::RampDown, PosterDesign::SplitRamp, PosterDesign::AlternatingRows];
    let mut posters = Vec::new();
    for (d, design) in designs.iter().enumerate() {
        for v in 0..3u32 {
            let img = render_poster(*design, v, [180, 90, 30], 200, 300);
            posters.push(HashedPoster {
                poster: PosterRef {
                    poster_id: format!("tt0000042-d{d}-v{v}"),
                    movie_id: "tt0000042".into(),
                    source: if v == 0 { PosterSource::ImdbMain } else { PosterSource::Tmdb },
                    image_path: format!("d{d}v{v}.png").into(),
                    width: 200,
                    height: 300,
                },
                dhash: compute_dhash(&DynamicImage::ImageRgb8(img)),
            });
        }
    }
    let base = dedup_posters(&posters, 16).map_err(|e| e.to_string())?;
    if base.clusters.len() != 4 {
        return Err(format!("{} clusters, want 4", base.clusters.len()));
    }
    for c in &base.clusters {
        let designs: BTreeSet<&str> = c.members.iter().map(|m| &m[10..12]).collect();
        if c.members.len() != 3 || designs.len() != 1 {
            return Err(format!("cluster mixes designs: {:?}", c.members));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let mut shuffled = posters.clone();
        shuffled.shuffle(&mut rng);
        let again = dedup_posters(&shuffled, 16).map_err(|e| e.to_string())?;
        if again != base {
            return Err("a permuted input changed the outcome".into());
        }
    }
    Ok("12 posters -> 4 clusters at threshold 16; 20 permutations identical".into())
}

// ---------------------------------------------------------------- matching

fn matching_rates(opts: &MatchingCorpusOptions, scope: IndexScope) -> (f64, f64, f64) {
    let corpus = matching_corpus(opts);
    let bundle = MockBackend::new(opts.seed, corpus.plan.clone())
        .infer(&corpus.manifest(), &InferenceRequest::default())
        .expect("mock inference");
    let profiles = select_profile_faces(&corpus.actors, &bundle, 0.9);
    let match_opts = MatchOptions { scope, ..Default::default() };
    let (matches, _) = match_posters(&corpus.movies, &corpus.posters, &bundle, &profiles, &match_opts);
    let report = evaluate_matching(&corpus.truth, &matches);
    (
        report.verification_rate.unwrap_or(0.0),
        report.identification_rate.unwrap_or(0.0),
        corpus.planted_availability(),
    )
}

fn matching_planted_corpus() -> Result<String, String> {
    let opts = MatchingCorpusOptions::default();
    if (opts.movies, opts.cast_size, opts.extras_fraction) != (50, 10, 0.3) {
        return Err("planted corpus defaults drifted".into());
    }
    let (verification, identification, planted) = matching_rates(&opts, IndexScope::WholeCast);
    if verification != 1.0 {
        return Err(format!("verification {verification}, want 1.0"));
    }
    if (identification - planted).abs() > IDENTIFICATION_TOLERANCE || (planted - 0.7).abs() > IDENTIFICATION_TOLERANCE {
        return Err(format!("identification {identification:.4} vs planted {planted:.4} (target 0.70 ± {IDENTIFICATION_TOLERANCE})"));
    }
    let scrambled = MatchingCorpusOptions { scramble_extra_cast: 10, ..opts };
    let (v_whole, whole, _) = matching_rates(&scrambled, IndexScope::WholeCast);
    let (v_top, top, _) = matching_rates(&scrambled, IndexScope::TopK(10));
    if whole < top {
        return Err(format!("scrambled ranks: whole-cast {whole:.4} < top-10 {top:.4}"));
    }
    if v_whole != 1.0 || v_top != 1.0 {
        return Err(format!("scrambled verification {v_whole} / {v_top}"));
    }
    Ok(format!(
        "verification 1.0, identification {identification:.4} (planted {planted:.4}); scrambled whole {whole:.4} >= top-10 {top:.4}"
    ))
}

// ---------------------------------------------------------------- vote

/// Returns the first category index whose summed weight is maximal.
fn oracle_vote(weights: &[Vec<i64>]) -> usize {
    let sums: Vec<i64> = (0..weights[0].len()).map(|i| weights.iter().map(|w| w[i]).sum()).collect();
    let max = *sums.iter().max().unwrap();
    sums.iter().position(|s| *s == max).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize, grid: i64) -> Vec<i64> {
    // `grid` units split among `n` categories
    let mut cuts: Vec<i64> = (0..n - 1).map(|_| rng.random_range(0..=grid)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain([grid]) {
        out.push(c - prev);
        prev = c;
    }
    out
}

fn vote_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut ties = 0;
    for trial in 0..1000 {
        let model = if trial % 4 == 3 { EthnicityModel::SevenClass } else { EthnicityModel::FourClass };
        let n = model.categories().len();
        let grid = 20;
        let weights: Vec<Vec<i64>> = (0..3).map(|_| random_weights(&mut rng, n, grid)).collect();
        let scores: Vec<EthnicityScores> = weights
            .iter()
            .map(|w| EthnicityScores::new(model, w.iter().map(|k| *k as f64 / grid as f64).collect()).unwrap())
            .collect();
        let refs: Vec<&EthnicityScores> = scores.iter().collect();
        let vote = vote_ethnicity(&refs).map_err(|e| e.to_string())?;
        let want = oracle_vote(&weights);
        if vote.voted != model.categories()[want] {
            return Err(format!("trial {trial}: voted {:?}, oracle {:?} for {weights:?}", vote.voted, model.categories()[want]));
        }
        let sums: Vec<i64> = (0..n).map(|i| weights.iter().map(|w| w[i]).sum()).collect();
        if sums.iter().filter(|s| **s == sums[want]).count() > 1 {
            ties += 1;
        }
        for (i, s) in sums.iter().enumerate() {
            let exact = Q::new(*s, 3 * grid);
            let exact = *exact.numer() as f64 / *exact.denom() as f64;
            if (vote.averaged_scores[i] - exact).abs() > METRIC_TOLERANCE {
                return Err(format!("trial {trial}: averaged score {i} is {} not {exact}", vote.averaged_scores[i]));
            }
        }
        let raw: Vec<Vec<f64>> = scores.iter().map(|s| s.values().to_vec()).collect();
        for c in [1e-3, 0.37, 2.0, 1e6] {
            let scaled: Vec<Vec<f64>> = raw.iter().map(|v| v.iter().map(|x| x * c).collect()).collect();
            let again = vote_raw(model, &scaled).map_err(|e| e.to_string())?;
            if again.voted != vote.voted {
                return Err(format!("trial {trial}: scaling by {c} moved the vote"));
            }
        }
    }
    Ok(format!("1000 triples match the exact oracle ({ties} exact ties); scaling by 1e-3..1e6 is invariant"))
}

// ---------------------------------------------------------------- metrics

struct MovieSpec {
    id: &'static str,
    decade: i32,
    genres: &'static [&'static str],
    language: LanguageClass,
    cast: &'static [&'static str],
}

const ACTOR_ETHNICITY: [(&str, Ethnicity); 12] = [
    ("a01", Ethnicity::White),
    ("a02", Ethnicity::White),
    ("a03", Ethnicity::Black),
    ("a04", Ethnicity::Asian),
    ("a05", Ethnicity::Indian),
    ("a06", Ethnicity::White),
    ("a07", Ethnicity::Black),
    ("a08", Ethnicity::Asian),
    ("a09", Ethnicity::White),
    ("a10", Ethnicity::Indian),
    ("a11", Ethnicity::White),
    ("a12", Ethnicity::Black),
];

const MOVIES: [MovieSpec; 6] = [
    MovieSpec { id: "M1", decade: 1990, genres: &["Drama"], language: LanguageClass::English, cast: &["a01", "a03", "a04", "a02", "a05"] },
    MovieSpec { id: "M2", decade: 1990, genres: &["Action", "Drama"], language: LanguageClass::English, cast: &["a06", "a07", "a01", "a08", "a09", "a10"] },
    MovieSpec { id: "M3", decade: 2000, genres: &["Comedy"], language: LanguageClass::NonEnglish, cast: &["a04", "a08", "a11", "a12"] },
    MovieSpec { id: "M4", decade: 2000, genres: &["Action"], language: LanguageClass::English, cast: &["a09", "a02", "a03", "a07", "a05", "a06", "a10", "a12"] },
    MovieSpec { id: "M5", decade: 2010, genres: &["Drama", "Romance"], language: LanguageClass::English, cast: &["a11", "a01", "a05", "a03", "a08"] },
    MovieSpec { id: "M6", decade: 2010, genres: &["Action", "Comedy"], language: LanguageClass::NonEnglish, cast: &["a12", "a10", "a06", "a04", "a02", "a07"] },
];

/// `movie poster [largest-area-override] : actor x y side ...`
const POSTERS: [&str; 14] = [
    "M1 P01 - : a01 30 40 120 | a03 200 50 90 | a04 100 300 60 | a02 250 400 40",
    "M1 P02 - : a01 20 20 150 | a05 220 300 70 | a04 120 120 45",
    "M1 P03 40000 : a03 150 200 100",
    "M2 P04 - : a06 10 10 140 | a07 200 30 140 | a08 100 350 50 | a09 300 450 45 | a10 50 500 30",
    "M2 P05 - : a06 100 100 110 | a01 250 100 60",
    "M3 P06 - : a04 40 60 130 | a08 220 60 120 | a11 120 320 80 | a12 20 420 50",
    "M3 P07 22500 : a04 100 50 100 | a12 100 300 100",
    "M3 P08 - : a08 150 250 90 | a11 30 30 40 | a04 250 450 60",
    "M4 P09 - : a09 50 50 150 | a02 220 40 120 | a03 60 300 70 | a07 200 300 70 | a05 300 500 35",
    "M4 P10 - : a06 20 20 100 | a10 200 200 90 | a12 100 450 60 | a09 260 40 130",
    "M5 P11 - : a11 100 100 160 | a01 10 400 60 | a05 300 400 60 | a03 150 500 40",
    "M5 P12 - : a08 10 10 70 | a11 200 200 110 | a01 40 300 55",
    "M6 P13 - : a12 120 150 140 | a10 20 20 70 | a06 280 20 70 | a04 20 480 50 | a02 300 480 50 | a07 160 400 45",
    "M6 P14 - : a10 60 60 120 | a06 220 100 110 | a02 100 400 60 | a07 250 420 50",
];

const POSTER_W: u32 = 400;
const POSTER_H: u32 = 600;

fn fixture_facts() -> Vec<FaceFact> {
    let eth: BTreeMap<&str, Ethnicity> = ACTOR_ETHNICITY.into_iter().collect();
    let mut facts = Vec::new();
    for line in POSTERS {
        let (head, faces) = line.split_once(" : ").unwrap();
        let head: Vec<&str> = head.split_whitespace().collect();
        let movie = MOVIES.iter().find(|m| m.id == head[0]).unwrap();
        let faces: Vec<(&str, f64, f64, f64)> = faces
            .split(" | ")
            .map(|f| {
                let p: Vec<&str> = f.split_whitespace().collect();
                (p[0], p[1].parse().unwrap(), p[2].parse().unwrap(), p[3].parse().unwrap())
            })
            .collect();
        let largest = match head[2] {
            "-" => faces.iter().map(|f| f.3 * f.3).fold(0.0, f64::max),
            n => n.parse().unwrap(),
        };
        for (i, (actor, x, y, side)) in faces.into_iter().enumerate() {
            facts.push(FaceFact {
                movie_id: movie.id.into(),
                poster_id: head[1].into(),
                face_index: i as u32,
                actor_id: actor.into(),
                ethnicity: eth[actor],
                bbox: BBox::new(x, y, side, side),
                poster_width: POSTER_W,
                poster_height: POSTER_H,
                largest_face_area: largest,
                cast_rank: movie.cast.iter().position(|a| *a == actor).unwrap() as u32 + 1,
                decade: movie.decade,
                genres: movie.genres.iter().map(|g| g.to_string()).collect(),
                language_class: movie.language,
            });
        }
    }
    facts
}

type Oracle = BTreeMap<Vec<String>, f64>;

fn q(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn q_mean(xs: &[Q]) -> Option<Q> {
    (!xs.is_empty()).then(|| xs.iter().copied().sum::<Q>() / Q::from_integer(xs.len() as i64))
}

fn key(parts: &[&dyn ToString]) -> Vec<String> {
    parts.iter().map(|p| p.to_string()).collect()
}

/// Brute-force recounts straight from the fact list, in exact rationals where the metric is rational.
struct Recount<'a> {
    facts: &'a [FaceFact],
    cats: &'a [Ethnicity],
}

impl<'a> Recount<'a> {
    fn movies(&self) -> BTreeSet<&'a str> {
        self.facts.iter().map(|f| f.movie_id.as_str()).collect()
    }
    fn of_movie(&self, m: &str) -> Vec<&'a FaceFact> {
        self.facts.iter().filter(|f| f.movie_id == m).collect()
    }
    fn posters_of(&self, m: &str) -> BTreeSet<&'a str> {
        self.of_movie(m).iter().map(|f| f.poster_id.as_str()).collect()
    }
    fn of_poster(&self, p: &str) -> Vec<&'a FaceFact> {
        self.facts.iter().filter(|f| f.poster_id == p).collect()
    }
    fn actors(&self, m: &str) -> BTreeMap<&'a str, &'a FaceFact> {
        self.of_movie(m).into_iter().map(|f| (f.actor_id.as_str(), f)).collect()
    }
    fn share(&self, m: &str, c: Ethnicity) -> Q {
        let a = self.actors(m);
        Q::new(a.values().filter(|f| f.ethnicity == c).count() as i64, a.len() as i64)
    }
    fn count(&self, m: &str, c: Ethnicity) -> i64 {
        self.actors(m).values().filter(|f| f.ethnicity == c).count() as i64
    }
    fn decade(&self, m: &str) -> i32 {
        self.of_movie(m)[0].decade
    }

    fn frequency(&self) -> (Oracle, Oracle) {
        let (mut frac, mut movies) = (Oracle::new(), Oracle::new());
        let decades: BTreeSet<i32> = self.facts.iter().map(|f| f.decade).collect();
        for d in decades {
            let ms: Vec<&str> = self.movies().into_iter().filter(|m| self.decade(m) == d).collect();
            for c in self.cats {
                let shares: Vec<Q> = ms.iter().map(|m| self.share(m, *c)).collect();
                frac.insert(key(&[&d, c]), q(q_mean(&shares).unwrap()));
                movies.insert(key(&[&d, c]), ms.len() as f64);
            }
        }
        (frac, movies)
    }

    fn positional(&self, value: &dyn Fn(&FaceFact) -> Q) -> Oracle {
        let mut out = Oracle::new();
        let decades: BTreeSet<i32> = self.facts.iter().map(|f| f.decade).collect();
        for d in decades {
            for c in self.cats {
                let mut movie_values = Vec::new();
                for m in self.movies().into_iter().filter(|m| self.decade(m) == d) {
                    let mut poster_values = Vec::new();
                    for p in self.posters_of(m) {
                        let vals: Vec<Q> = self.of_poster(p).iter().filter(|f| f.ethnicity == *c).map(|f| value(f)).collect();
                        if let Some(v) = q_mean(&vals) {
                            poster_values.push(v);
                        }
                    }
                    if let Some(v) = q_mean(&poster_values) {
                        movie_values.push(v);
                    }
                }
                if let Some(v) = q_mean(&movie_values) {
                    out.insert(key(&[&d, c]), q(v));
                }
            }
        }
        out
    }

    fn center_distance(&self) -> Oracle {
        // irrational, so recount in f64 with plain loops
        let dist = |f: &FaceFact| {
            let cx = f.bbox.x + f.bbox.w / 2.0 - f.poster_width as f64 / 2.0;
            let cy = f.bbox.y + f.bbox.h / 2.0 - f.poster_height as f64 / 2.0;
            ((cx * cx + cy * cy) / ((f.poster_width as f64).powi(2) / 4.0 + (f.poster_height as f64).powi(2) / 4.0)).sqrt()
        };
        let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let mut out = Oracle::new();
        let decades: BTreeSet<i32> = self.facts.iter().map(|f| f.decade).collect();
        for d in decades {
            for c in self.cats {
                let mut movie_values = Vec::new();
                for m in self.movies().into_iter().filter(|m| self.decade(m) == d) {
                    let pv: Vec<f64> = self
                        .posters_of(m)
                        .into_iter()
                        .filter_map(|p| avg(&self.of_poster(p).iter().filter(|f| f.ethnicity == *c).map(|f| dist(f)).collect::<Vec<_>>()))
                        .collect();
                    movie_values.extend(avg(&pv));
                }
                if let Some(v) = avg(&movie_values) {
                    out.insert(key(&[&d, c]), v);
                }
            }
        }
        out
    }

    fn buckets(&self) -> (Oracle, Oracle, Oracle) {
        let (mut frac, mut count, mut movies) = (Oracle::new(), Oracle::new(), Oracle::new());
        let label = |n: usize| if n > 6 { ">6".to_string() } else { n.to_string() };
        let labels: BTreeSet<usize> = self.movies().iter().map(|m| self.actors(m).len().min(7)).collect();
        for b in labels {
            let ms: Vec<&str> = self.movies().into_iter().filter(|m| self.actors(m).len().min(7) == b).collect();
            for c in self.cats {
                let k = vec![label(b), c.to_string()];
                frac.insert(k.clone(), q(q_mean(&ms.iter().map(|m| self.share(m, *c)).collect::<Vec<_>>()).unwrap()));
                count.insert(k.clone(), q(q_mean(&ms.iter().map(|m| Q::from_integer(self.count(m, *c))).collect::<Vec<_>>()).unwrap()));
                movies.insert(k, ms.len() as f64);
            }
        }
        (frac, count, movies)
    }

    fn conditional(&self) -> Oracle {
        let mut per_movie: BTreeMap<(Ethnicity, Ethnicity), Vec<Q>> = BTreeMap::new();
        for m in self.movies() {
            let mut per_cond: BTreeMap<Ethnicity, Vec<Vec<Q>>> = BTreeMap::new();
            for p in self.posters_of(m) {
                let faces = self.of_poster(p);
                if faces.len() < 2 {
                    continue;
                }
                let area = |f: &FaceFact| (f.bbox.w * f.bbox.h) as i64;
                let max = faces.iter().map(|f| area(f)).max().unwrap();
                let big = faces.iter().filter(|f| area(f) == max).min_by_key(|f| f.face_index).unwrap();
                let others: Vec<_> = faces.iter().filter(|f| f.face_index != big.face_index).collect();
                let dist = self
                    .cats
                    .iter()
                    .map(|c| Q::new(others.iter().filter(|f| f.ethnicity == *c).count() as i64, others.len() as i64))
                    .collect();
                per_cond.entry(big.ethnicity).or_default().push(dist);
            }
            for (r, dists) in per_cond {
                for (i, c) in self.cats.iter().enumerate() {
                    let v = q_mean(&dists.iter().map(|d| d[i]).collect::<Vec<_>>()).unwrap();
                    per_movie.entry((r, *c)).or_default().push(v);
                }
            }
        }
        per_movie.into_iter().map(|((r, c), v)| (key(&[&r, &c]), q(q_mean(&v).unwrap()))).collect()
    }

    fn genres(&self) -> (Oracle, Oracle) {
        let genres: BTreeSet<&str> = self.facts.iter().flat_map(|f| f.genres.iter().map(String::as_str)).collect();
        let with = |g: &str| -> Vec<&str> { self.movies().into_iter().filter(|m| self.of_movie(m)[0].genres.contains(g)).collect() };
        let mut a = Oracle::new();
        for g in &genres {
            for c in self.cats {
                a.insert(key(&[g, c]), q(q_mean(&with(g).iter().map(|m| self.share(m, *c)).collect::<Vec<_>>()).unwrap()));
            }
        }
        let mut b = Oracle::new();
        for c in self.cats {
            let mass: BTreeMap<&str, Q> = genres.iter().map(|g| (*g, with(g).iter().map(|m| self.share(m, *c)).sum())).collect();
            let total: Q = mass.values().copied().sum();
            if total > Q::from_integer(0) {
                for (g, m) in mass {
                    b.insert(key(&[c, &g]), q(m / total));
                }
            }
        }
        (a, b)
    }

    fn ranks(&self, max_rank: u32) -> (Oracle, Oracle) {
        let (mut frac, mut actors) = (Oracle::new(), Oracle::new());
        let pairs: Vec<(u32, Ethnicity)> =
            self.movies().iter().flat_map(|m| self.actors(m).into_values().map(|f| (f.cast_rank, f.ethnicity))).collect();
        for r in 1..=max_rank {
            let at: Vec<Ethnicity> = pairs.iter().filter(|(k, _)| *k == r).map(|(_, e)| *e).collect();
            if at.is_empty() {
                continue;
            }
            for c in self.cats {
                let n = at.iter().filter(|e| *e == c).count();
                frac.insert(key(&[&r, c]), q(Q::new(n as i64, at.len() as i64)));
                actors.insert(key(&[&r, c]), n as f64);
            }
        }
        (frac, actors)
    }

    fn poster_stats(&self) -> (f64, f64, f64) {
        let posters: BTreeSet<&str> = self.facts.iter().map(|f| f.poster_id.as_str()).collect();
        let counts: Vec<i64> = posters
            .iter()
            .map(|p| self.of_poster(p).iter().map(|f| f.actor_id.as_str()).collect::<BTreeSet<_>>().len() as i64)
            .collect();
        let n = counts.len() as i64;
        let mean = Q::new(counts.iter().sum(), n);
        let var = counts.iter().map(|c| (Q::from_integer(*c) - mean) * (Q::from_integer(*c) - mean)).sum::<Q>() / Q::from_integer(n);
        (n as f64, q(mean), q(var).sqrt())
    }

    fn parity(&self, census: &CensusTable) -> Oracle {
        let pool = |e: Ethnicity| match e {
            Ethnicity::White => "White",
            Ethnicity::Black => "Black",
            Ethnicity::Asian | Ethnicity::Indian => "Asian",
            other => panic!("{other:?} outside the four-class fixture"),
        };
        let (freq, _) = self.frequency();
        let mut out = Oracle::new();
        for (decade, shares) in census.decades() {
            let rows: Vec<(&Vec<String>, &f64)> = freq.iter().filter(|(k, _)| k[0] == decade.to_string()).collect();
            if rows.is_empty() {
                continue;
            }
            for (cat, share) in shares {
                let rep: f64 = rows.iter().filter(|(k, _)| pool(k[1].parse().unwrap()) == cat.label()).map(|(_, v)| **v).sum();
                if *share > 0.0 {
                    out.insert(key(&[&decade, &decade, &cat.label()]), rep / share);
                }
            }
        }
        out
    }
}

fn compare(table: &MetricTable, column: &str, oracle: &Oracle) -> Result<usize, String> {
    let col = table.column(column).ok_or_else(|| format!("{} has no column {column}", table.name))?;
    let got: Oracle = table.rows.iter().filter_map(|r| r.values[col].map(|v| (r.keys.clone(), v))).collect();
    let (gk, ok): (BTreeSet<_>, BTreeSet<_>) = (got.keys().collect(), oracle.keys().collect());
    if gk != ok {
        return Err(format!("{}.{column}: keys {:?} vs oracle {:?}", table.name, gk.symmetric_difference(&ok).collect::<Vec<_>>(), ok.len()));
    }
    for (k, want) in oracle {
        let v = got[k];
        if (v - want).abs() > METRIC_TOLERANCE {
            return Err(format!("{}.{column} {k:?}: {v} vs oracle {want}", table.name));
        }
    }
    Ok(oracle.len())
}

fn slices_sum_to_one(tables: &[MetricTable]) -> Result<usize, String> {
    let mut n = 0;
    for t in tables {
        for (k, s) in t.slice_sums() {
            n += 1;
            if (s - 1.0).abs() > SLICE_TOLERANCE {
                return Err(format!("{} slice {k:?} sums to {s}", t.name));
            }
        }
    }
    Ok(n)
}

fn metrics_fixture() -> Result<String, String> {
    let facts = fixture_facts();
    if facts.len() != 50 {
        return Err(format!("fixture has {} facts", facts.len()));
    }
    let census = CensusTable::bundled();
    let analysis = analyze(&facts, &census, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let t = |name: &str| analysis.table(name).ok_or_else(|| format!("missing table {name}"));
    let cats = EthnicityModel::FourClass.categories();
    let r = Recount { facts: &facts, cats };
    let mut checked = 0;

    let (frac, movies) = r.frequency();
    checked += compare(t("ethnic_frequency_by_decade")?, "fraction", &frac)?;
    checked += compare(t("ethnic_frequency_by_decade")?, "movies", &movies)?;
    let rel = r.positional(&|f| Q::new((f.bbox.w * f.bbox.h) as i64, f.largest_face_area as i64));
    checked += compare(t("relative_face_size")?, "mean_relative_size", &rel)?;
    checked += compare(t("center_distance")?, "mean_distance", &r.center_distance())?;
    let (bf, bc, bm) = r.buckets();
    checked += compare(t("unique_actor_buckets")?, "fraction", &bf)?;
    checked += compare(t("unique_actor_buckets")?, "mean_count", &bc)?;
    checked += compare(t("unique_actor_buckets")?, "movies", &bm)?;
    checked += compare(t("conditional_given_largest")?, "probability", &r.conditional())?;
    let (ga, gb) = r.genres();
    checked += compare(t("genre_race_distribution")?, "fraction", &ga)?;
    checked += compare(t("race_genre_distribution")?, "share", &gb)?;
    let (rf, ra) = r.ranks(12);
    checked += compare(t("rank_race_ratio")?, "fraction", &rf)?;
    checked += compare(t("rank_race_ratio")?, "actors", &ra)?;
    let (posters, mean, sd) = r.poster_stats();
    for (col, want) in [("posters", posters), ("mean", mean), ("stddev", sd)] {
        checked += compare(t("poster_face_stats")?, col, &[(vec![], want)].into())?;
    }
    checked += compare(t("parity_ratio")?, "ratio", &r.parity(&census))?;

    let slices = slices_sum_to_one(&analysis.tables)? + {
        let mut n = 0;
        for seed in 0..5 {
            let random = random_facts(&FactOptions { seed, movies: 30, ..Default::default() });
            let a = analyze(&random, &census, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
            n += slices_sum_to_one(&a.tables)?;
        }
        n
    };

    let mut duplicated = facts.clone();
    duplicated.extend(facts.iter().filter(|f| f.poster_id == "P01").map(|f| FaceFact { poster_id: "P01-copy".into(), ..f.clone() }));
    let dup = analyze(&duplicated, &census, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    if dup.table("ethnic_frequency_by_decade") != analysis.table("ethnic_frequency_by_decade") {
        return Err("duplicating a poster changed decade frequencies".into());
    }
    Ok(format!("{checked} cells equal the brute-force recount; {slices} slices sum to 1; poster duplication leaves frequencies unchanged"))
}

// ---------------------------------------------------------------- parity

fn dist(pairs: &[(CensusCategory, f64)]) -> CensusDistribution {
    let mut d: CensusDistribution = CensusCategory::ALL.iter().map(|c| (*c, 0.0)).collect();
    d.extend(pairs.iter().copied());
    d
}

fn parity() -> Result<String, String> {
    use CensusCategory::*;
    let rep = dist(&[(White, 0.79), (Black, 0.11), (Asian, 0.07), (Other, 0.03)]);
    let census = dist(&[(White, 0.693), (Black, 0.131), (Asian, 0.056), (Other, 0.12)]);
    let white = ratio_against(&rep, &census)[&White].ok_or("undefined White ratio")?;
    if (white - 1.14).abs() > PARITY_TOLERANCE {
        return Err(format!("White ratio {white}, want 1.14 ± {PARITY_TOLERANCE}"));
    }
    let table = CensusTable::bundled();
    for year in [1965, 1999, 2015] {
        let shares = table.lookup(year).ok_or("no census")?.shares.clone();
        let rep: BTreeMap<Ethnicity, f64> = [
            (Ethnicity::White, shares[&White]),
            (Ethnicity::Black, shares[&Black]),
            (Ethnicity::EastAsian, shares[&Asian]),
            (Ethnicity::LatinoHispanic, shares[&Other]),
        ]
        .into();
        let row = posterlens::demographics::parity_ratio(&rep, &table, year).ok_or("no parity row")?;
        for (c, r) in &row.ratio {
            let r = r.ok_or(format!("{year} {c:?} undefined"))?;
            if (r - 1.0).abs() > METRIC_TOLERANCE {
                return Err(format!("{year} {c:?}: parity input gives {r}"));
            }
        }
    }
    Ok(format!("0.79 / 0.693 = {white:.4}; census-shaped inputs give 1.0 in 3 decades"))
}

// ---------------------------------------------------------------- end to end

fn metric_csvs(out: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(out.join("metrics"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn end_to_end() -> Result<String, String> {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let corpus = write_corpus(tmp.path(), &SynthOptions::default()).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&corpus.config_path).map_err(|e| e.to_string())?;
        let cfg = Config::from_toml(&text, tmp.path(), Vec::new()).map_err(|e| e.to_string())?;
        run_pipeline(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
        runs.push(metric_csvs(&cfg.paths.out_dir));
    }
    if runs[0].len() != 10 {
        return Err(format!("{} metric CSVs, want 10", runs[0].len()));
    }
    if runs[0] != runs[1] {
        let differing: Vec<&String> = runs[0].iter().filter(|(k, v)| runs[1].get(*k) != Some(v)).map(|(k, _)| k).collect();
        return Err(format!("CSVs differ between clean runs: {differing:?}"));
    }
    Ok(format!("{} CSVs byte-identical across two clean runs", runs[0].len()))
}

// ---------------------------------------------------------------- driver

fn main() {
    let criteria: [(&str, Duration, fn() -> Result<String, String>); 7] = [
        ("dhash bit-exactness", Duration::from_secs(1), dhash_bit_exactness),
        ("dedup fixture", Duration::from_secs(1), dedup_fixture),
        ("matching on planted corpus", Duration::from_secs(30), matching_planted_corpus),
        ("vote_ethnicity oracle", Duration::from_secs(1), vote_oracle),
        ("metric tables vs brute force", Duration::from_secs(5), metrics_fixture),
        ("parity ratio", Duration::from_secs(1), parity),
        ("end-to-end determinism", Duration::from_secs(60), end_to_end),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name:<30} {:>8.3}s / {:>3}s  {msg}", elapsed.as_secs_f64(), limit.as_secs()),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<30} {:>8.3}s / {:>3}s  {msg}", elapsed.as_secs_f64(), limit.as_secs());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
