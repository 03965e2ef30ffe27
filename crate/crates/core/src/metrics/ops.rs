use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::facts::{FaceFact, LanguageClass};
use super::table::{compensated_sum, mean, MetricTable};
use crate::ethnicity::Ethnicity;

/// Unique-actor buckets: counts 1..=6 get their own bucket, larger counts share one.
pub const BUCKET_CAP: usize = 6;
pub const DEFAULT_MAX_RANK: u32 = 12;

pub(crate) struct PosterGroup<'a> {
    pub faces: Vec<&'a FaceFact>,
}

pub(crate) struct MovieGroup<'a> {
    pub decade: i32,
    pub genres: &'a BTreeSet<String>,
    pub language: LanguageClass,
    pub posters: Vec<PosterGroup<'a>>,
    /// Distinct matched actors with their ethnicity and cast rank.
    pub actors: BTreeMap<&'a str, (Ethnicity, u32)>,
}

/// Facts grouped by movie then poster, in sorted order regardless of input order.
pub(crate) fn group_movies(facts: &[FaceFact]) -> Vec<MovieGroup<'_>> {
    let mut sorted: Vec<&FaceFact> = facts.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut movies: Vec<MovieGroup> = Vec::new();
    let mut last_movie: Option<&str> = None;
    let mut last_poster: Option<&str> = None;
    for f in sorted {
        if last_movie != Some(f.movie_id.as_str()) {
            movies.push(MovieGroup {
                decade: f.decade,
                genres: &f.genres,
                language: f.language_class,
                posters: Vec::new(),
                actors: BTreeMap::new(),
            });
            last_movie = Some(&f.movie_id);
            last_poster = None;
        }
        let m = movies.last_mut().unwrap();
        if last_poster != Some(f.poster_id.as_str()) {
            m.posters.push(PosterGroup { faces: Vec::new() });
            last_poster = Some(&f.poster_id);
        }
        m.posters.last_mut().unwrap().faces.push(f);
        m.actors.entry(&f.actor_id).or_insert((f.ethnicity, f.cast_rank));
    }
    movies
}

fn position(cats: &[Ethnicity], e: Ethnicity) -> Option<usize> {
    cats.iter().position(|c| *c == e)
}

/// Category fractions over the movie's distinct matched actors.
fn actor_fractions(m: &MovieGroup, cats: &[Ethnicity]) -> Vec<f64> {
    let counts = actor_counts(m, cats);
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

fn actor_counts(m: &MovieGroup, cats: &[Ethnicity]) -> Vec<f64> {
    let mut counts = vec![0.0; cats.len()];
    for (e, _) in m.actors.values() {
        if let Some(i) = position(cats, *e) {
            counts[i] += 1.0;
        }
    }
    counts
}

/// Mean of per-movie vectors within each key, one row per (key, category).
fn fraction_rows(table: &mut MetricTable, groups: BTreeMap<String, Vec<Vec<f64>>>, cats: &[Ethnicity]) {
    for (key, vectors) in groups {
        let n = vectors.len() as f64;
        for (i, c) in cats.iter().enumerate() {
            let v = mean(vectors.iter().map(|v| v[i]));
            table.push(vec![key.clone(), c.label().into()], vec![v, Some(n)]);
        }
    }
}

pub fn ethnic_frequency_by_decade(facts: &[FaceFact], cats: &[Ethnicity]) -> MetricTable {
    let movies = group_movies(facts);
    let per_movie: Vec<(i32, Vec<f64>)> = movies.par_iter().map(|m| (m.decade, actor_fractions(m, cats))).collect();
    let mut groups: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (d, v) in per_movie {
        groups.entry(d.to_string()).or_default().push(v);
    }
    let mut t = MetricTable::new(
        "ethnic_frequency_by_decade",
        &["decade", "category"],
        &["fraction", "movies"],
        "per movie: share of distinct matched actors per category; then unweighted mean over movies in the decade",
    )
    .with_slices(&[0], 0);
    fraction_rows(&mut t, groups, cats);
    t
}

/// Per movie and category: mean over posters of the per-poster mean of `value`.
fn movie_positional(m: &MovieGroup, cats: &[Ethnicity], value: &dyn Fn(&FaceFact) -> f64) -> Vec<Option<f64>> {
    (0..cats.len())
        .map(|i| {
            mean(m.posters.iter().filter_map(|p| {
                mean(
                    p.faces
                        .iter()
                        .filter(|f| position(cats, f.ethnicity) == Some(i))
                        .map(|f| value(f)),
                )
            }))
        })
        .collect()
}

fn positional_table(
    name: &str,
    column: &str,
    note: &str,
    facts: &[FaceFact],
    cats: &[Ethnicity],
    value: &(dyn Fn(&FaceFact) -> f64 + Sync),
) -> MetricTable {
    let movies = group_movies(facts);
    let per_movie: Vec<(i32, Vec<Option<f64>>)> =
        movies.par_iter().map(|m| (m.decade, movie_positional(m, cats, value))).collect();
    let mut by_decade: BTreeMap<i32, Vec<&Vec<Option<f64>>>> = BTreeMap::new();
    for (d, v) in &per_movie {
        by_decade.entry(*d).or_default().push(v);
    }
    let mut t = MetricTable::new(name, &["decade", "category"], &[column, "movies"], note);
    for (d, vecs) in by_decade {
        for (i, c) in cats.iter().enumerate() {
            let vals: Vec<f64> = vecs.iter().filter_map(|v| v[i]).collect();
            if let Some(m) = mean(vals.iter().copied()) {
                t.push(vec![d.to_string(), c.label().into()], vec![Some(m), Some(vals.len() as f64)]);
            }
        }
    }
    t
}

pub fn relative_size(f: &FaceFact) -> f64 {
    if f.largest_face_area > 0.0 {
        f.bbox.area() / f.largest_face_area
    } else {
        1.0
    }
}

pub fn normalized_center_distance(f: &FaceFact) -> f64 {
    let (cx, cy) = f.bbox.center();
    let (px, py) = (f.poster_width as f64 / 2.0, f.poster_height as f64 / 2.0);
    (cx - px).hypot(cy - py) / px.hypot(py)
}

pub fn relative_face_size(facts: &[FaceFact], cats: &[Ethnicity]) -> MetricTable {
    positional_table(
        "relative_face_size",
        "mean_relative_size",
        "face area over the largest detected face area on the poster; mean over posters, then over movies",
        facts,
        cats,
        &relative_size,
    )
}

pub fn center_distance(facts: &[FaceFact], cats: &[Ethnicity]) -> MetricTable {
    positional_table(
        "center_distance",
        "mean_distance",
        "distance from face center to poster center over the half-diagonal; mean over posters, then over movies",
        facts,
        cats,
        &normalized_center_distance,
    )
}

pub fn bucket_label(count: usize) -> String {
    if count > BUCKET_CAP {
        format!(">{BUCKET_CAP}")
    } else {
        count.to_string()
    }
}

pub fn unique_actor_buckets(facts: &[FaceFact], cats: &[Ethnicity]) -> MetricTable {
    let movies = group_movies(facts);
    let per_movie: Vec<(usize, Vec<f64>, Vec<f64>)> = movies
        .par_iter()
        .map(|m| (m.actors.len().min(BUCKET_CAP + 1), actor_fractions(m, cats), actor_counts(m, cats)))
        .collect();
    let mut groups: BTreeMap<usize, Vec<(&Vec<f64>, &Vec<f64>)>> = BTreeMap::new();
    for (b, f, c) in &per_movie {
        groups.entry(*b).or_default().push((f, c));
    }
    let mut t = MetricTable::new(
        "unique_actor_buckets",
        &["bucket", "category"],
        &["fraction", "mean_count", "movies"],
        "movies bucketed by distinct matched actors over all posters; per bucket the mean actor share and mean actor count per category",
    )
    .with_slices(&[0], 0);
    for (b, rows) in groups {
        for (i, c) in cats.iter().enumerate() {
            t.push(
                vec![bucket_label(b), c.label().into()],
                vec![
                    mean(rows.iter().map(|(f, _)| f[i])),
                    mean(rows.iter().map(|(_, c)| c[i])),
                    Some(rows.len() as f64),
                ],
            );
        }
    }
    t
}

/// Largest face by area; ties go to the lowest face index.
fn largest_face<'a>(faces: &[&'a FaceFact]) -> &'a FaceFact {
    let mut best = faces[0];
    for f in &faces[1..] {
        if f.bbox.area() > best.bbox.area() {
            best = f;
        }
    }
    best
}

/// Returns the table and the number of single-face posters skipped.
pub fn conditional_race_given_largest(facts: &[FaceFact], cats: &[Ethnicity]) -> (MetricTable, usize) {
    let movies = group_movies(facts);
    // per movie: condition index -> mean distribution over that movie's posters
    let per_movie: Vec<(BTreeMap<usize, Vec<f64>>, usize)> = movies
        .par_iter()
        .map(|m| {
            let mut per_cond: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
            let mut skipped = 0;
            for p in &m.posters {
                if p.faces.len() < 2 {
                    skipped += 1;
                    continue;
                }
                let big = largest_face(&p.faces);
                let Some(r) = position(cats, big.ethnicity) else { continue };
                let mut dist = vec![0.0; cats.len()];
                let others: Vec<_> = p.faces.iter().filter(|f| !std::ptr::eq(**f, big)).collect();
                for f in &others {
                    if let Some(i) = position(cats, f.ethnicity) {
                        dist[i] += 1.0 / others.len() as f64;
                    }
                }
                per_cond.entry(r).or_default().push(dist);
            }
            let averaged = per_cond
                .into_iter()
                .map(|(r, ds)| (r, (0..cats.len()).map(|i| mean(ds.iter().map(|d| d[i])).unwrap()).collect()))
                .collect();
            (averaged, skipped)
        })
        .collect();
    let skipped = per_movie.iter().map(|(_, s)| s).sum();
    let mut groups: BTreeMap<usize, Vec<&Vec<f64>>> = BTreeMap::new();
    for (m, _) in &per_movie {
        for (r, d) in m {
            groups.entry(*r).or_default().push(d);
        }
    }
    let mut t = MetricTable::new(
        "conditional_given_largest",
        &["largest_category", "category"],
        &["probability", "movies"],
        "posters with two or more matched faces; category shares of the non-largest faces given the largest face's category; mean over posters, then over movies",
    )
    .with_slices(&[0], 0);
    for (r, ds) in groups {
        for (i, c) in cats.iter().enumerate() {
            t.push(
                vec![cats[r].label().into(), c.label().into()],
                vec![mean(ds.iter().map(|d| d[i])), Some(ds.len() as f64)],
            );
        }
    }
    (t, skipped)
}

/// Table A: category shares per genre. Table B: genre shares per category.
pub fn genre_race_tables(facts: &[FaceFact], cats: &[Ethnicity]) -> (MetricTable, MetricTable) {
    let movies = group_movies(facts);
    let per_movie: Vec<(&BTreeSet<String>, Vec<f64>)> = movies.par_iter().map(|m| (m.genres, actor_fractions(m, cats))).collect();
    let mut by_genre: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (genres, f) in &per_movie {
        for g in genres.iter() {
            by_genre.entry(g).or_default().push(f);
        }
    }
    let mut a = MetricTable::new(
        "genre_race_distribution",
        &["genre", "category"],
        &["fraction", "movies"],
        "per genre: mean over its movies of the movie's actor shares; a movie counts in every genre it bears",
    )
    .with_slices(&[0], 0);
    let groups: BTreeMap<String, Vec<Vec<f64>>> = by_genre
        .iter()
        .map(|(g, v)| (g.to_string(), v.iter().map(|x| (*x).clone()).collect()))
        .collect();
    fraction_rows(&mut a, groups, cats);

    let mut b = MetricTable::new(
        "race_genre_distribution",
        &["category", "genre"],
        &["share", "movies"],
        "per category: movie-level actor shares summed per genre, normalized across genres",
    )
    .with_slices(&[0], 0);
    for (i, c) in cats.iter().enumerate() {
        let mass: Vec<(&str, f64, usize)> = by_genre
            .iter()
            .map(|(g, v)| (*g, compensated_sum(v.iter().map(|f| f[i])), v.len()))
            .collect();
        let total = compensated_sum(mass.iter().map(|(_, m, _)| *m));
        if total <= 0.0 {
            continue;
        }
        for (g, m, n) in mass {
            b.push(vec![c.label().into(), g.into()], vec![Some(m / total), Some(n as f64)]);
        }
    }
    (a, b)
}

/// Distinct (movie, actor) pairs as (rank, ethnicity).
fn rank_pairs(facts: &[FaceFact]) -> Vec<(u32, Ethnicity)> {
    group_movies(facts)
        .iter()
        .flat_map(|m| m.actors.values().map(|(e, r)| (*r, *e)).collect::<Vec<_>>())
        .collect()
}

pub fn rank_race_ratio(facts: &[FaceFact], cats: &[Ethnicity], max_rank: u32) -> MetricTable {
    let mut counts: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (r, e) in rank_pairs(facts) {
        if r == 0 || r > max_rank {
            continue;
        }
        if let Some(i) = position(cats, e) {
            counts.entry(r).or_insert_with(|| vec![0.0; cats.len()])[i] += 1.0;
        }
    }
    let mut t = MetricTable::new(
        "rank_race_ratio",
        &["rank", "category"],
        &["fraction", "actors"],
        "distinct matched (movie, actor) pairs per cast rank; category shares per rank",
    )
    .with_slices(&[0], 0);
    for (r, c) in counts {
        let total: f64 = c.iter().sum();
        for (i, cat) in cats.iter().enumerate() {
            t.push(vec![r.to_string(), cat.label().into()], vec![Some(c[i] / total), Some(c[i])]);
        }
    }
    t
}

/// Share of non-White actors among distinct matched (movie, actor) pairs with rank in `ranks`.
pub fn minority_share(facts: &[FaceFact], ranks: RangeInclusive<u32>) -> Option<f64> {
    let pairs: Vec<_> = rank_pairs(facts).into_iter().filter(|(r, _)| ranks.contains(r)).collect();
    let minority = pairs.iter().filter(|(_, e)| *e != Ethnicity::White).count();
    (!pairs.is_empty()).then(|| minority as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosterFaceStats {
    pub posters: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

impl PosterFaceStats {
    pub fn to_table(&self) -> MetricTable {
        let mut t = MetricTable::new(
            "poster_face_stats",
            &[],
            &["posters", "mean", "stddev"],
            "distinct matched actors per poster with at least one matched face; population statistics",
        );
        t.push(vec![], vec![Some(self.posters as f64), self.mean, self.stddev]);
        t
    }
}

pub fn poster_face_stats(facts: &[FaceFact]) -> PosterFaceStats {
    let counts: Vec<f64> = group_movies(facts)
        .iter()
        .flat_map(|m| {
            m.posters
                .iter()
                .map(|p| p.faces.iter().map(|f| f.actor_id.as_str()).collect::<BTreeSet<_>>().len() as f64)
                .collect::<Vec<_>>()
        })
        .collect();
    let mu = mean(counts.iter().copied());
    let sd = mu.and_then(|m| mean(counts.iter().map(|c| (c - m) * (c - m)))).map(f64::sqrt);
    PosterFaceStats {
        posters: counts.len(),
        mean: mu,
        stddev: sd,
    }
}

/// Distinct movies per language class, used for recombining filtered outputs.
pub fn movies_by_language(facts: &[FaceFact]) -> BTreeMap<LanguageClass, usize> {
    let mut out = BTreeMap::new();
    for m in group_movies(facts) {
        *out.entry(m.language).or_insert(0) += 1;
    }
    out
}
