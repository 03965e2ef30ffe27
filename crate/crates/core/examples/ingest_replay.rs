//! Ingest a synthetic movie dump offline, serving every remote call from a cassette.

use posterlens::ingestion::{ingest, IngestOptions, MovieFilter, ReplayClient, RetryPolicy};
use posterlens::synthetic::{write_corpus, SynthOptions};

fn main() -> posterlens::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| posterlens::Error::io(std::env::temp_dir(), e))?;
    let corpus = write_corpus(tmp.path(), &SynthOptions::default())?;
    let out = tmp.path().join("catalog");
    let opts = IngestOptions {
        movie_dump: corpus.dump_dir.clone(),
        filter: MovieFilter { min_votes: 1000, exclude_animated: true },
        out_dir: out.clone(),
        cache_dir: tmp.path().join("cache"),
        retry: RetryPolicy::no_delay(3),
        max_year: 2100,
    };
    let report = ingest(&opts, ReplayClient::new(&corpus.cassette_dir))?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let catalog = posterlens::ingestion::Catalog::load(&out)?;
    for m in catalog.movies.iter().take(3) {
        println!("{} {} ({}) cast={} lang={:?}", m.movie_id, m.title, m.year, m.cast.len(), m.original_language);
    }
    Ok(())
}
