use std::sync::Arc;

use posterlens::ingestion::{
    ingest, Catalog, CountingClient, DisabledClient, IngestOptions, MovieFilter, PosterSource, ReplayClient, RetryPolicy,
};
use posterlens::synthetic::{actor_has_no_images, write_corpus, SynthOptions};

fn options(root: &std::path::Path, out: &str) -> IngestOptions {
    IngestOptions {
        movie_dump: root.join("dump"),
        filter: MovieFilter { min_votes: 1000, exclude_animated: true },
        out_dir: root.join(out),
        cache_dir: root.join("cache"),
        retry: RetryPolicy::no_delay(2),
        max_year: 2100,
    }
}

#[test]
fn replay_ingest_of_the_synthetic_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = SynthOptions::default();
    write_corpus(tmp.path(), &opts).unwrap();
    let corpus_root = tmp.path();
    let report = ingest(&options(corpus_root, "a"), ReplayClient::new(corpus_root.join("cassette"))).unwrap();

    assert_eq!(report.movies_kept, opts.movies);
    assert_eq!(report.posters_per_source[&PosterSource::ImdbMain], opts.movies);
    assert_eq!(report.posters_per_source[&PosterSource::Tmdb], 4 * opts.movies);
    assert_eq!(report.fetch_failures, 0);
    let imageless = (0..opts.actor_pool).filter(|j| actor_has_no_images(*j)).count();
    assert_eq!(report.actors_without_images, imageless);

    let catalog = Catalog::load(&tmp.path().join("a")).unwrap();
    assert!(catalog.movies.iter().all(|m| !m.is_animated && m.num_votes >= 1000));
    let languages: Vec<_> = catalog.movies.iter().map(|m| m.original_language.as_deref()).collect();
    assert!(languages.contains(&Some("fr")) && languages.contains(&Some("en")));
    assert!(catalog.posters.iter().all(|p| p.image_path.is_file()));
}

#[test]
fn second_ingest_is_served_from_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), &SynthOptions::default()).unwrap();
    let root = tmp.path();
    ingest(&options(root, "a"), ReplayClient::new(root.join("cassette"))).unwrap();

    let counting = Arc::new(CountingClient::new(DisabledClient));
    let again = ingest(&options(root, "b"), counting.clone()).unwrap();
    assert_eq!(counting.calls(), 0);
    assert_eq!(again.fetch_failures, 0);
    for file in ["movies.jsonl", "posters.jsonl", "actors.jsonl"] {
        assert_eq!(
            std::fs::read(root.join("a").join(file)).unwrap(),
            std::fs::read(root.join("b").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn offline_ingest_without_cache_records_failures_instead_of_aborting() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), &SynthOptions::default()).unwrap();
    let report = ingest(&options(tmp.path(), "a"), DisabledClient).unwrap();
    assert_eq!(report.movies_kept, 10);
    assert!(report.fetch_failures > 0);
    assert_eq!(report.posters_per_source.values().sum::<usize>(), 0);
}
