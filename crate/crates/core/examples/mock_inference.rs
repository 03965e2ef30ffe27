//! Run the deterministic mock backend over a planted manifest and validate the bundle.

use posterlens::gateway::{run_inference, Bundle, InferenceOptions, InferenceRequest, MockBackend};
use posterlens::synthetic::{matching_corpus, MatchingCorpusOptions};

fn main() -> posterlens::Result<()> {
    let corpus = matching_corpus(&MatchingCorpusOptions { movies: 3, ..Default::default() });
    let backend = MockBackend::new(7, corpus.plan.clone()).crash_on(&corpus.posters[0].poster_id, 1);
    let tmp = tempfile::tempdir().map_err(|e| posterlens::Error::io(std::env::temp_dir(), e))?;
    let opts = InferenceOptions {
        shard_size: 8,
        work_dir: tmp.path().join("work"),
        out_dir: tmp.path().join("bundle"),
    };
    let outcome = run_inference(&corpus.manifest(), &backend, &InferenceRequest::default(), &opts)?;
    println!("backend {} produced {} images, {} shards failed twice", outcome.meta.backend, outcome.meta.images, outcome.failures.len());

    let bundle = Bundle::read(&opts.out_dir)?;
    bundle.validate()?;
    let faces: usize = bundle.detections.iter().map(|d| d.faces.len()).sum();
    println!("bundle is valid: {faces} faces, {} embeddings of dim {}", bundle.embeddings.len(), bundle.meta.embedding_dim);
    for entry in std::fs::read_dir(&opts.out_dir).map_err(|e| posterlens::Error::io(&opts.out_dir, e))? {
        println!("  {}", entry.map_err(|e| posterlens::Error::io(&opts.out_dir, e))?.file_name().to_string_lossy());
    }
    Ok(())
}
