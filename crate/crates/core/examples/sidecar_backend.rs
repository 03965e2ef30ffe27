//! Drive an external sidecar process through the file protocol.
//!
//! Uses the `posterlens mock-sidecar` subcommand as the external process; pass
//! the path of the built binary as the first argument.

use posterlens::gateway::{run_inference, Bundle, InferenceOptions, InferenceRequest, SidecarBackend};
use posterlens::io::write_json;
use posterlens::synthetic::{matching_corpus, MatchingCorpusOptions};

fn main() -> posterlens::Result<()> {
    let Some(bin) = std::env::args().nth(1) else {
        eprintln!("usage: sidecar_backend <path-to-posterlens-binary>");
        std::process::exit(2);
    };
    let corpus = matching_corpus(&MatchingCorpusOptions { movies: 2, ..Default::default() });
    let tmp = tempfile::tempdir().map_err(|e| posterlens::Error::io(std::env::temp_dir(), e))?;
    let plan = tmp.path().join("plan.json");
    write_json(&plan, &corpus.plan)?;
    let backend = SidecarBackend::new(bin).arg("mock-sidecar").arg("--plan").arg(plan.to_string_lossy());
    let opts = InferenceOptions { shard_size: 16, work_dir: tmp.path().join("work"), out_dir: tmp.path().join("bundle") };
    let outcome = run_inference(&corpus.manifest(), &backend, &InferenceRequest::default(), &opts)?;
    let bundle = Bundle::read(&opts.out_dir)?;
    bundle.validate()?;
    println!("{} images through {}, {} failed shards", bundle.detections.len(), outcome.meta.backend, outcome.failures.len());
    Ok(())
}
