use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{InferenceBackend, ManifestEntry};
use super::bundle::{Bundle, BundleMeta};
use super::types::InferenceRequest;
use crate::error::{Error, Result};
use crate::io::{write_jsonl, read_jsonl};

pub const DEFAULT_SHARD_SIZE: usize = 512;
pub const FAILURES_FILE: &str = "inference_failures.jsonl";

#[derive(Debug, Clone)]
pub struct InferenceOptions {
    pub shard_size: usize,
    /// Scratch space for shard manifests and shard bundles.
    pub work_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardFailure {
    pub shard: usize,
    pub image_refs: Vec<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOutcome {
    pub meta: BundleMeta,
    pub failures: Vec<ShardFailure>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    read_jsonl(path)
}

fn attempt_shard(
    backend: &dyn InferenceBackend,
    entries: &[ManifestEntry],
    request: &InferenceRequest,
    shard_dir: &Path,
) -> Result<Bundle> {
    let manifest = shard_dir.join("manifest.jsonl");
    write_jsonl(&manifest, entries)?;
    let out = shard_dir.join("out");
    if out.exists() {
        fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    backend
        .run_shard(&manifest, request, &out)
        .map_err(|e| Error::Stage {
            stage: "inference".into(),
            message: e.to_string(),
        })?;
    let bundle = Bundle::read(&out)?;
    let got: Vec<&str> = bundle.detections.iter().map(|d| d.image_ref.as_str()).collect();
    let want: Vec<&str> = entries.iter().map(|e| e.image_ref.as_str()).collect();
    if got != want {
        return Err(Error::Invalid(format!(
            "backend returned detections for {} of {} manifest images",
            got.len(),
            want.len()
        )));
    }
    if bundle.meta.tasks != request.tasks || bundle.meta.ethnicity_model != request.ethnicity_model {
        return Err(Error::Invalid("backend answered a different request".into()));
    }
    Ok(bundle)
}

/// Shard the manifest, run each shard (retrying a failed shard once), and merge
/// the shard bundles into `opts.out_dir` in manifest order.
pub fn run_inference(
    manifest: &[ManifestEntry],
    backend: &dyn InferenceBackend,
    request: &InferenceRequest,
    opts: &InferenceOptions,
) -> Result<InferenceOutcome> {
    let shard_size = opts.shard_size.max(1);
    let shards: Vec<&[ManifestEntry]> = manifest.chunks(shard_size).collect();
    let results: Vec<std::result::Result<Bundle, ShardFailure>> = shards
        .par_iter()
        .enumerate()
        .map(|(i, entries)| {
            let dir = opts.work_dir.join(format!("shard-{i:05}"));
            let mut last = String::new();
            for attempt in 0..2 {
                match attempt_shard(backend, entries, request, &dir) {
                    Ok(b) => {
                        let _ = fs::remove_dir_all(&dir);
                        return Ok(b);
                    }
                    Err(e) => {
                        tracing::warn!(shard = i, attempt, "shard failed: {e}");
                        let _ = fs::remove_dir_all(dir.join("out"));
                        last = e.to_string();
                    }
                }
            }
            Err(ShardFailure {
                shard: i,
                image_refs: entries.iter().map(|e| e.image_ref.clone()).collect(),
                error: last,
            })
        })
        .collect();

    let mut merged = Bundle::empty(&backend.name(), request);
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(b) => merged.extend(b),
            Err(f) => failures.push(f),
        }
    }
    merged.write_dir_atomic(&opts.out_dir)?;
    write_jsonl(&opts.out_dir.join(FAILURES_FILE), &failures)?;
    Ok(InferenceOutcome {
        meta: merged.meta,
        failures,
    })
}
