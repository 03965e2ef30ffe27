//! Each pipeline stage as a function over explicit input and output paths.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demographics::CensusTable;
use crate::error::{Error, Result};
use crate::ethnicity::EthnicityModel;
use crate::gateway::{run_inference, Bundle, InferenceBackend, InferenceOptions, InferenceRequest, ManifestEntry, ShardFailure};
use crate::identity::{
    actor_image_ref, match_posters, select_profile_faces, vote_actors, ActorEthnicity, MatchOptions, MatchResult,
    MatchStats,
};
use crate::imageprep::{dedup_posters, dhash_file, is_grayscale_file, DedupCluster, HashedPoster};
use crate::ingestion::{ActorProfileRaw, MovieRecord, PosterRef, ACTORS_FILE, MOVIES_FILE, POSTERS_FILE};
use crate::io::{read_jsonl, write_json, write_jsonl};
use crate::metrics::{analyze, build_facts, Analysis, AnalyzeOptions, FaceFact, FactsCoverage, FACTS_COVERAGE_FILE, FACTS_FILE};

pub const HASHED_POSTERS_FILE: &str = "posters.hashed.jsonl";
pub const CLUSTERS_FILE: &str = "clusters.jsonl";
pub const HASH_FAILURES_FILE: &str = "hash_failures.jsonl";
pub const DROPPED_IMAGES_FILE: &str = "dropped.jsonl";
pub const INFERENCE_MANIFEST_FILE: &str = "manifest.jsonl";
pub const BUNDLE_DIR: &str = "bundle";
pub const MATCHES_FILE: &str = "matches.jsonl";
pub const MATCH_STATS_FILE: &str = "match_stats.json";
pub const VOTES_FILE: &str = "ethnicity.jsonl";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFailure {
    pub path: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub posters_in: usize,
    pub posters_kept: usize,
    pub clusters: usize,
    pub hash_failures: usize,
}

/// Hash posters and cluster them per movie; kept posters go to `posters.jsonl`.
pub fn dedup_stage(posters: &[PosterRef], threshold: u32, out_dir: &Path) -> Result<DedupReport> {
    ensure_dir(out_dir)?;
    let hashed: Vec<std::result::Result<HashedPoster, ImageFailure>> = posters
        .par_iter()
        .map(|p| match dhash_file(&p.image_path) {
            Ok(dhash) => Ok(HashedPoster { poster: p.clone(), dhash }),
            Err(e) => Err(ImageFailure { path: p.image_path.clone(), error: e.to_string() }),
        })
        .collect();
    let (ok, failed): (Vec<_>, Vec<_>) = hashed.into_iter().partition(|r| r.is_ok());
    let ok: Vec<HashedPoster> = ok.into_iter().map(|r| r.unwrap()).collect();
    let failed: Vec<ImageFailure> = failed.into_iter().map(|r| r.unwrap_err()).collect();

    let mut by_movie: BTreeMap<&str, Vec<HashedPoster>> = BTreeMap::new();
    for h in &ok {
        by_movie.entry(&h.poster.movie_id).or_default().push(h.clone());
    }
    let outcomes = by_movie
        .par_iter()
        .map(|(_, ps)| dedup_posters(ps, threshold))
        .collect::<Result<Vec<_>>>()?;
    let clusters: Vec<&DedupCluster> = outcomes.iter().flat_map(|o| &o.clusters).collect();
    let kept: Vec<&PosterRef> = outcomes.iter().flat_map(|o| &o.kept).collect();

    write_jsonl(&out_dir.join(HASHED_POSTERS_FILE), &ok)?;
    write_jsonl(&out_dir.join(CLUSTERS_FILE), &clusters)?;
    write_jsonl(&out_dir.join(POSTERS_FILE), &kept)?;
    write_jsonl(&out_dir.join(HASH_FAILURES_FILE), &failed)?;
    Ok(DedupReport {
        posters_in: posters.len(),
        posters_kept: kept.len(),
        clusters: clusters.len(),
        hash_failures: failed.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GrayscaleReport {
    pub images_in: usize,
    pub dropped_grayscale: usize,
    pub dropped_unreadable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedImage {
    pub actor_id: String,
    pub path: PathBuf,
    pub reason: String,
}

/// Drop grayscale and unreadable profile pictures; actors keep their remaining images.
pub fn grayscale_stage(actors: &[ActorProfileRaw], tolerance: f64, out_dir: &Path) -> Result<GrayscaleReport> {
    ensure_dir(out_dir)?;
    let judged: Vec<(ActorProfileRaw, Vec<DroppedImage>)> = actors
        .par_iter()
        .map(|a| {
            let mut kept = Vec::new();
            let mut dropped = Vec::new();
            for p in &a.image_paths {
                match is_grayscale_file(p, tolerance) {
                    Ok(false) => kept.push(p.clone()),
                    Ok(true) => dropped.push(DroppedImage { actor_id: a.actor_id.clone(), path: p.clone(), reason: "grayscale".into() }),
                    Err(e) => dropped.push(DroppedImage { actor_id: a.actor_id.clone(), path: p.clone(), reason: e.to_string() }),
                }
            }
            (ActorProfileRaw { image_paths: kept, ..a.clone() }, dropped)
        })
        .collect();
    let dropped: Vec<&DroppedImage> = judged.iter().flat_map(|(_, d)| d).collect();
    let report = GrayscaleReport {
        images_in: actors.iter().map(|a| a.image_paths.len()).sum(),
        dropped_grayscale: dropped.iter().filter(|d| d.reason == "grayscale").count(),
        dropped_unreadable: dropped.iter().filter(|d| d.reason != "grayscale").count(),
    };
    write_jsonl(&out_dir.join(ACTORS_FILE), judged.iter().map(|(a, _)| a))?;
    write_jsonl(&out_dir.join(DROPPED_IMAGES_FILE), &dropped)?;
    Ok(report)
}

/// Posters first, then actor pictures, each in input order.
pub fn build_manifest(posters: &[PosterRef], actors: &[ActorProfileRaw]) -> Vec<ManifestEntry> {
    let mut out: Vec<ManifestEntry> = posters
        .iter()
        .map(|p| ManifestEntry { image_ref: p.poster_id.clone(), path: p.image_path.clone() })
        .collect();
    for a in actors {
        for p in &a.image_paths {
            out.push(ManifestEntry { image_ref: actor_image_ref(&a.actor_id, p), path: p.clone() });
        }
    }
    out
}

pub fn inference_stage(
    posters: &[PosterRef],
    actors: &[ActorProfileRaw],
    backend: &dyn InferenceBackend,
    request: &InferenceRequest,
    shard_size: usize,
    out_dir: &Path,
) -> Result<Vec<ShardFailure>> {
    ensure_dir(out_dir)?;
    let manifest = build_manifest(posters, actors);
    write_jsonl(&out_dir.join(INFERENCE_MANIFEST_FILE), &manifest)?;
    let work = tempfile::Builder::new()
        .prefix(".work-")
        .tempdir_in(out_dir)
        .map_err(|e| Error::io(out_dir, e))?;
    let outcome = run_inference(
        &manifest,
        backend,
        request,
        &InferenceOptions {
            shard_size,
            work_dir: work.path().to_path_buf(),
            out_dir: out_dir.join(BUNDLE_DIR),
        },
    )?;
    Ok(outcome.failures)
}

/// Actor profiles recovered from `actor:` references in a bundle, in bundle order.
pub fn actors_from_bundle(bundle: &Bundle) -> Vec<ActorProfileRaw> {
    let mut actors: Vec<ActorProfileRaw> = Vec::new();
    for d in &bundle.detections {
        let Some(rest) = d.image_ref.strip_prefix("actor:") else { continue };
        let Some((actor, stem)) = rest.rsplit_once(':') else { continue };
        let path = PathBuf::from(stem);
        match actors.iter_mut().find(|a| a.actor_id == actor) {
            Some(a) => a.image_paths.push(path),
            None => actors.push(ActorProfileRaw { actor_id: actor.into(), name: actor.into(), image_paths: vec![path] }),
        }
    }
    actors
}

pub fn match_stage(
    movies: &[MovieRecord],
    posters: &[PosterRef],
    actors: &[ActorProfileRaw],
    bundle: &Bundle,
    opts: &MatchOptions,
    out_file: &Path,
) -> Result<(Vec<MatchResult>, MatchStats)> {
    let profiles = select_profile_faces(actors, bundle, opts.confidence_floor);
    let (matches, stats) = match_posters(movies, posters, bundle, &profiles, opts);
    write_jsonl(out_file, &matches)?;
    let stats_file = out_file.with_file_name(MATCH_STATS_FILE);
    write_json(&stats_file, &stats)?;
    Ok((matches, stats))
}

pub fn vote_stage(
    actors: &[ActorProfileRaw],
    bundle: &Bundle,
    model: Option<EthnicityModel>,
    confidence_floor: f64,
    out_file: &Path,
) -> Result<Vec<ActorEthnicity>> {
    let model = model.unwrap_or(bundle.meta.ethnicity_model);
    if model != bundle.meta.ethnicity_model {
        return Err(Error::Invalid(format!(
            "bundle holds {} scores, {} requested",
            bundle.meta.ethnicity_model.cli_name(),
            model.cli_name()
        )));
    }
    let profiles = select_profile_faces(actors, bundle, confidence_floor);
    let votes = vote_actors(actors, &profiles, model).map_err(|e| Error::Invalid(e.to_string()))?;
    write_jsonl(out_file, &votes)?;
    Ok(votes)
}

#[allow(clippy::too_many_arguments)]
pub fn facts_stage(
    movies: &[MovieRecord],
    posters: &[PosterRef],
    bundle: &Bundle,
    matches: &[MatchResult],
    votes: &[ActorEthnicity],
    confidence_floor: f64,
    out_dir: &Path,
) -> Result<(Vec<FaceFact>, FactsCoverage)> {
    ensure_dir(out_dir)?;
    let (facts, coverage) = build_facts(movies, posters, bundle, matches, votes, confidence_floor);
    write_jsonl(&out_dir.join(FACTS_FILE), &facts)?;
    write_json(&out_dir.join(FACTS_COVERAGE_FILE), &coverage)?;
    Ok((facts, coverage))
}

pub fn load_census(path: Option<&Path>) -> Result<CensusTable> {
    match path {
        Some(p) => CensusTable::load(p),
        None => Ok(CensusTable::bundled()),
    }
}

/// Analyze a facts file; picks up `facts_coverage.json` next to it when present.
pub fn analyze_stage(facts_file: &Path, census: Option<&Path>, opts: &AnalyzeOptions, out_dir: &Path) -> Result<Analysis> {
    let facts: Vec<FaceFact> = read_jsonl(facts_file)?;
    let census = load_census(census)?;
    let mut analysis = analyze(&facts, &census, opts)?;
    let upstream = facts_file.with_file_name(FACTS_COVERAGE_FILE);
    if upstream.is_file() {
        analysis.coverage.upstream = Some(crate::io::read_json(&upstream)?);
    }
    analysis.write(out_dir)?;
    Ok(analysis)
}

/// Catalog pieces, with optional replacements for the poster and actor lists.
pub fn load_catalog_parts(
    catalog_dir: &Path,
    posters: Option<&Path>,
    actors: Option<&Path>,
) -> Result<(Vec<MovieRecord>, Vec<PosterRef>, Vec<ActorProfileRaw>)> {
    let movies = read_jsonl(&catalog_dir.join(MOVIES_FILE))?;
    let posters = read_jsonl(&posters.map(Path::to_path_buf).unwrap_or_else(|| catalog_dir.join(POSTERS_FILE)))?;
    let actors = read_jsonl(&actors.map(Path::to_path_buf).unwrap_or_else(|| catalog_dir.join(ACTORS_FILE)))?;
    Ok((movies, posters, actors))
}
