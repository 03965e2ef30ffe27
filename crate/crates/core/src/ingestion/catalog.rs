use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::MetadataClient;
use super::dump::{read_movie_dump, Reject};
use super::fetch::{FetchCache, FetchFailure, Fetcher, RetryPolicy};
use super::filter::{filter_records, MovieFilter};
use super::types::{ActorProfileRaw, MovieRecord, PosterRef, PosterSource};
use crate::error::Result;
use crate::io::{read_jsonl, write_json, write_jsonl};

pub const MOVIES_FILE: &str = "movies.jsonl";
pub const POSTERS_FILE: &str = "posters.jsonl";
pub const ACTORS_FILE: &str = "actors.jsonl";
pub const REJECTS_FILE: &str = "rejects.jsonl";
pub const FAILURES_FILE: &str = "fetch_failures.jsonl";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";

/// The local catalog: one JSONL file per entity kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub movies: Vec<MovieRecord>,
    pub posters: Vec<PosterRef>,
    pub actors: Vec<ActorProfileRaw>,
}

impl Catalog {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Catalog {
            movies: read_jsonl(&dir.join(MOVIES_FILE))?,
            posters: read_jsonl(&dir.join(POSTERS_FILE))?,
            actors: read_jsonl(&dir.join(ACTORS_FILE))?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_jsonl(&dir.join(MOVIES_FILE), &self.movies)?;
        write_jsonl(&dir.join(POSTERS_FILE), &self.posters)?;
        write_jsonl(&dir.join(ACTORS_FILE), &self.actors)?;
        Ok(())
    }

    pub fn movie(&self, movie_id: &str) -> Option<&MovieRecord> {
        self.movies.iter().find(|m| m.movie_id == movie_id)
    }

    pub fn movies_by_id(&self) -> HashMap<&str, &MovieRecord> {
        self.movies.iter().map(|m| (m.movie_id.as_str(), m)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub dump_records: usize,
    pub rejected: usize,
    pub movies_kept: usize,
    /// Posters per source, so pre-dedup totals can be reported either way.
    pub posters_per_source: BTreeMap<PosterSource, usize>,
    pub movies_without_posters: usize,
    pub actors: usize,
    pub actors_without_images: usize,
    pub actor_images: usize,
    pub fetch_failures: usize,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub movie_dump: PathBuf,
    pub filter: MovieFilter,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub retry: RetryPolicy,
    pub max_year: i32,
}

/// Build the catalog from the dump and write it with its failure ledgers.
pub fn ingest<C: MetadataClient>(opts: &IngestOptions, client: C) -> Result<IngestReport> {
    let dump = read_movie_dump(&opts.movie_dump, opts.max_year)?;
    let dump_records = dump.records.len();
    let mut rejects: Vec<Reject> = Vec::new();
    let mut movies = filter_records(dump.records, &opts.filter, &mut rejects);

    let fetcher = Fetcher::new(client, FetchCache::new(&opts.cache_dir), opts.retry);
    movies.par_iter_mut().for_each(|m| {
        if m.original_language.is_none() {
            m.original_language = fetcher.movie_language(&m.movie_id);
        }
    });
    let posters: Vec<Vec<PosterRef>> = movies.par_iter().map(|m| fetcher.fetch_posters(m)).collect();

    let cast: Vec<String> = movies
        .iter()
        .flat_map(|m| m.cast.iter().map(|c| c.actor_id.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let actors: Vec<ActorProfileRaw> = cast
        .par_chunks(64)
        .flat_map_iter(|chunk| fetcher.fetch_actor_profiles(chunk, &dump.actor_names))
        .collect();
    let failures: Vec<FetchFailure> = fetcher.take_failures();

    let mut report = IngestReport {
        dump_records,
        rejected: rejects.len(),
        movies_kept: movies.len(),
        movies_without_posters: posters.iter().filter(|p| p.is_empty()).count(),
        actors: actors.len(),
        actors_without_images: actors.iter().filter(|a| a.image_paths.is_empty()).count(),
        actor_images: actors.iter().map(|a| a.image_paths.len()).sum(),
        fetch_failures: failures.len(),
        ..Default::default()
    };
    for p in posters.iter().flatten() {
        *report.posters_per_source.entry(p.source).or_default() += 1;
    }

    let catalog = Catalog {
        movies,
        posters: posters.into_iter().flatten().collect(),
        actors,
    };
    catalog.save(&opts.out_dir)?;
    write_jsonl(&opts.out_dir.join(REJECTS_FILE), &rejects)?;
    write_jsonl(&opts.out_dir.join(FAILURES_FILE), &failures)?;
    write_json(&opts.out_dir.join(INGEST_REPORT_FILE), &report)?;
    Ok(report)
}
