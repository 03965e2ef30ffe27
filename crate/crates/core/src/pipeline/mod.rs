//! Stage orchestration with digest-based skipping and a run manifest.

mod config;
pub mod stages;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    apply_env_overrides, AnalyzeConfig, BackendKind, Config, DedupConfig, GrayscaleConfig, InferenceConfig,
    IngestConfig, MatchingConfig, PathsConfig, ScopeKind, SourceKind, ENV_PREFIX,
};

use crate::error::{Error, Result};
use crate::gateway::{Bundle, IdentityPlan, InferenceBackend, InferenceRequest, MockBackend, SidecarBackend, TaskSet};
use crate::identity::{ActorEthnicity, MatchOptions, MatchResult};
use crate::ingestion::{
    ingest, Catalog, DisabledClient, IngestOptions, LiveClient, LiveConfig, MetadataClient, MovieFilter, ReplayClient,
    RetryPolicy, ACTORS_FILE, POSTERS_FILE,
};
use crate::io::{file_digest, read_json, read_jsonl, sha256_hex, write_json};
use crate::metrics::{AnalyzeOptions, FACTS_FILE};
use stages::*;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const LOCK_FILE: &str = ".posterlens.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Dedup,
    Grayscale,
    Inference,
    Match,
    Vote,
    Facts,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Dedup,
        Stage::Grayscale,
        Stage::Inference,
        Stage::Match,
        Stage::Vote,
        Stage::Facts,
        Stage::Analyze,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Dedup => "dedup",
            Stage::Grayscale => "grayscale",
            Stage::Inference => "inference",
            Stage::Match => "match",
            Stage::Vote => "vote",
            Stage::Facts => "facts",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }

    /// Directory under the run's output directory.
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Ingest => "catalog",
            Stage::Analyze => "metrics",
            Stage::Report => "plots",
            other => other.name(),
        }
    }

    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Dedup | Stage::Grayscale => &[Stage::Ingest],
            Stage::Inference => &[Stage::Dedup, Stage::Grayscale],
            Stage::Match => &[Stage::Ingest, Stage::Dedup, Stage::Grayscale, Stage::Inference],
            Stage::Vote => &[Stage::Grayscale, Stage::Inference],
            Stage::Facts => &[Stage::Ingest, Stage::Dedup, Stage::Inference, Stage::Match, Stage::Vote],
            Stage::Analyze => &[Stage::Facts],
            Stage::Report => &[Stage::Analyze],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Executed,
    Skipped,
    Failed,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub fingerprint: String,
    /// Digests of inputs from outside the run directory.
    pub external_inputs: Vec<(String, String)>,
    pub output_digest: Option<String>,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub format_version: String,
    pub config: Config,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    pub fn executed(&self) -> Vec<Stage> {
        self.stages.iter().filter(|r| r.status == StageStatus::Executed).map(|r| r.stage).collect()
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(out_dir: &Path) -> Result<RunLock> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write as _;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another run (remove {} if that run is gone)",
                out_dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        if e.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        let p = e.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

/// Digest of a file, or of every non-hidden file under a directory by relative path.
pub fn path_digest(path: &Path) -> Result<String> {
    if path.is_file() {
        return file_digest(path);
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    let mut h = Sha256::new();
    for rel in files {
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(file_digest(&path.join(&rel))?.as_bytes());
        h.update([0]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Re-run every stage regardless of fingerprints.
    pub force: bool,
}

/// Resolved locations of every stage's outputs.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub out_dir: PathBuf,
}

impl RunLayout {
    pub fn stage_dir(&self, s: Stage) -> PathBuf {
        self.out_dir.join(s.dir_name())
    }
    pub fn catalog(&self) -> PathBuf {
        self.stage_dir(Stage::Ingest)
    }
    pub fn kept_posters(&self) -> PathBuf {
        self.stage_dir(Stage::Dedup).join(POSTERS_FILE)
    }
    pub fn kept_actors(&self) -> PathBuf {
        self.stage_dir(Stage::Grayscale).join(ACTORS_FILE)
    }
    pub fn bundle(&self) -> PathBuf {
        self.stage_dir(Stage::Inference).join(BUNDLE_DIR)
    }
    pub fn matches(&self) -> PathBuf {
        self.stage_dir(Stage::Match).join(MATCHES_FILE)
    }
    pub fn votes(&self) -> PathBuf {
        self.stage_dir(Stage::Vote).join(VOTES_FILE)
    }
    pub fn facts(&self) -> PathBuf {
        self.stage_dir(Stage::Facts).join(FACTS_FILE)
    }
    pub fn metrics(&self) -> PathBuf {
        self.stage_dir(Stage::Analyze)
    }
    pub fn plots(&self) -> PathBuf {
        self.stage_dir(Stage::Report)
    }
}

fn stage_config(cfg: &Config, s: Stage) -> serde_json::Value {
    use serde_json::json;
    match s {
        Stage::Ingest => json!({ "movie_dump": cfg.paths.movie_dump, "ingest": cfg.ingest }),
        Stage::Dedup => json!(cfg.dedup),
        Stage::Grayscale => json!(cfg.grayscale),
        Stage::Inference => json!({
            "backend": cfg.inference.backend,
            "command": cfg.inference.command,
            "mock_seed": cfg.inference.mock_seed,
            "ethnicity_model": cfg.inference.ethnicity_model.cli_name(),
        }),
        Stage::Match => json!(cfg.matching),
        Stage::Vote | Stage::Facts => json!({ "confidence_floor": cfg.matching.confidence_floor }),
        Stage::Analyze => json!({ "analyze": cfg.analyze, "model": cfg.inference.ethnicity_model.cli_name() }),
        Stage::Report => json!({}),
    }
}

fn external_inputs(cfg: &Config, s: Stage) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    match s {
        Stage::Ingest => {
            out.push(("movie_dump".into(), path_digest(&cfg.paths.movie_dump)?));
            if cfg.ingest.source == SourceKind::Replay {
                if let Some(c) = &cfg.ingest.cassette {
                    out.push(("cassette".into(), path_digest(c)?));
                }
            }
        }
        Stage::Inference => {
            if cfg.inference.backend == BackendKind::Mock {
                if let Some(p) = &cfg.inference.mock_plan {
                    out.push(("mock_plan".into(), path_digest(p)?));
                }
            }
        }
        Stage::Analyze => match &cfg.paths.census {
            Some(c) => out.push(("census".into(), path_digest(c)?)),
            None => out.push((
                crate::demographics::BUNDLED_CENSUS_VERSION.into(),
                sha256_hex(crate::demographics::BUNDLED_CENSUS_CSV.as_bytes()),
            )),
        },
        _ => {}
    }
    Ok(out)
}

fn fingerprint(s: Stage, config: &serde_json::Value, external: &[(String, String)], upstream: &[&StageRecord]) -> String {
    let mut h = Sha256::new();
    h.update(crate::FORMAT_VERSION.as_bytes());
    h.update(s.name().as_bytes());
    h.update(config.to_string().as_bytes());
    for (k, v) in external {
        h.update(format!("\0{k}={v}").as_bytes());
    }
    for r in upstream {
        h.update(format!("\0{}:{}:{}", r.stage.name(), r.fingerprint, r.output_digest.as_deref().unwrap_or("")).as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn metadata_client(cfg: &Config) -> Result<Arc<dyn MetadataClient>> {
    Ok(match cfg.ingest.source {
        SourceKind::Replay => Arc::new(ReplayClient::new(
            cfg.ingest.cassette.clone().ok_or_else(|| Error::Config("replay needs ingest.cassette".into()))?,
        )),
        SourceKind::Live => Arc::new(LiveClient::new(
            LiveConfig::from_env(4.0).ok_or_else(|| Error::Config("live ingestion needs TMDB_API_KEY".into()))?,
        )),
        SourceKind::Offline => Arc::new(DisabledClient),
    })
}

pub fn inference_backend(cfg: &Config) -> Result<Box<dyn InferenceBackend>> {
    Ok(match cfg.inference.backend {
        BackendKind::Mock => {
            let path = cfg.inference.mock_plan.as_ref().ok_or_else(|| Error::Config("mock backend needs inference.mock_plan".into()))?;
            let plan: IdentityPlan = read_json(path)?;
            Box::new(MockBackend::new(cfg.inference.mock_seed, plan))
        }
        BackendKind::Sidecar => {
            let cmd = cfg.inference.command.as_deref().unwrap_or_default();
            Box::new(SidecarBackend::from_command_line(cmd).ok_or_else(|| Error::Config("empty inference.command".into()))?)
        }
    })
}

pub fn match_options(cfg: &Config) -> MatchOptions {
    MatchOptions {
        scope: cfg.matching.index_scope(),
        accept_threshold: cfg.matching.accept_threshold,
        confidence_floor: cfg.matching.confidence_floor,
    }
}

fn execute(cfg: &Config, layout: &RunLayout, s: Stage) -> Result<()> {
    let dir = layout.stage_dir(s);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let floor = cfg.matching.confidence_floor;
    match s {
        Stage::Ingest => {
            let opts = IngestOptions {
                movie_dump: cfg.paths.movie_dump.clone(),
                filter: MovieFilter { min_votes: cfg.ingest.min_votes, exclude_animated: cfg.ingest.exclude_animated },
                out_dir: dir,
                cache_dir: cfg.cache_dir(),
                retry: RetryPolicy { max_attempts: cfg.ingest.retry_attempts.max(1), ..Default::default() },
                max_year: cfg.ingest.max_year,
            };
            ingest(&opts, metadata_client(cfg)?)?;
        }
        Stage::Dedup => {
            let posters = read_jsonl(&layout.catalog().join(POSTERS_FILE))?;
            dedup_stage(&posters, cfg.dedup.threshold, &dir)?;
        }
        Stage::Grayscale => {
            let actors = read_jsonl(&layout.catalog().join(ACTORS_FILE))?;
            grayscale_stage(&actors, cfg.grayscale.tolerance, &dir)?;
        }
        Stage::Inference => {
            let posters = read_jsonl(&layout.kept_posters())?;
            let actors = read_jsonl(&layout.kept_actors())?;
            let backend = inference_backend(cfg)?;
            let request = InferenceRequest { tasks: TaskSet::ALL, ethnicity_model: cfg.inference.ethnicity_model };
            let failures = inference_stage(&posters, &actors, backend.as_ref(), &request, cfg.inference.shard_size, &dir)?;
            if !failures.is_empty() {
                tracing::warn!(shards = failures.len(), "inference shards failed twice; their images are missing");
            }
        }
        Stage::Match => {
            let (movies, posters, actors) =
                load_catalog_parts(&layout.catalog(), Some(&layout.kept_posters()), Some(&layout.kept_actors()))?;
            let bundle = Bundle::read(&layout.bundle())?;
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            match_stage(&movies, &posters, &actors, &bundle, &match_options(cfg), &layout.matches())?;
        }
        Stage::Vote => {
            let actors = read_jsonl(&layout.kept_actors())?;
            let bundle = Bundle::read(&layout.bundle())?;
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            vote_stage(&actors, &bundle, Some(cfg.inference.ethnicity_model), floor, &layout.votes())?;
        }
        Stage::Facts => {
            let (movies, posters, _) = load_catalog_parts(&layout.catalog(), Some(&layout.kept_posters()), None)?;
            let bundle = Bundle::read(&layout.bundle())?;
            let matches: Vec<MatchResult> = read_jsonl(&layout.matches())?;
            let votes: Vec<ActorEthnicity> = read_jsonl(&layout.votes())?;
            facts_stage(&movies, &posters, &bundle, &matches, &votes, floor, &dir)?;
        }
        Stage::Analyze => {
            let opts = AnalyzeOptions {
                model: cfg.inference.ethnicity_model,
                language: cfg.analyze.language,
                max_rank: cfg.analyze.max_rank,
            };
            analyze_stage(&layout.facts(), cfg.paths.census.as_deref(), &opts, &dir)?;
        }
        Stage::Report => {
            crate::report::render_report(&layout.metrics(), &dir)?;
        }
    }
    Ok(())
}

/// Run every stage in order, skipping stages whose fingerprint and outputs are unchanged.
///
/// The manifest is written after every stage. A failing stage stops the run and
/// leaves downstream stages recorded as not run.
pub fn run_pipeline(cfg: &Config, opts: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    let _lock = RunLock::acquire(&cfg.paths.out_dir)?;
    let layout = RunLayout { out_dir: cfg.paths.out_dir.clone() };
    let manifest_path = cfg.paths.out_dir.join(RUN_MANIFEST_FILE);
    let previous: Option<RunManifest> = if manifest_path.is_file() { read_json(&manifest_path).ok() } else { None };

    let mut manifest = RunManifest {
        tool_version: crate::TOOL_VERSION.into(),
        format_version: crate::FORMAT_VERSION.into(),
        config: cfg.clone(),
        stages: Vec::new(),
    };
    let mut failure: Option<Error> = None;
    for s in Stage::ALL {
        if failure.is_some() {
            manifest.stages.push(StageRecord {
                stage: s,
                status: StageStatus::NotRun,
                fingerprint: String::new(),
                external_inputs: vec![],
                output_digest: None,
                duration_ms: 0,
                error: None,
            });
            continue;
        }
        let started = Instant::now();
        let upstream: Vec<&StageRecord> = s.upstream().iter().filter_map(|u| manifest.record(*u)).collect();
        let external = external_inputs(cfg, s)?;
        let fp = fingerprint(s, &stage_config(cfg, s), &external, &upstream);
        let dir = layout.stage_dir(s);

        let reusable = previous
                .as_ref()
                .filter(|_| !opts.force)
                .and_then(|p| p.record(s))
                .filter(|r| matches!(r.status, StageStatus::Executed | StageStatus::Skipped) && r.fingerprint == fp)
                .and_then(|r| r.output_digest.clone())
                .filter(|d| dir.exists() && path_digest(&dir).ok().as_ref() == Some(d));

        let record = match reusable {
            Some(digest) => {
                tracing::info!(stage = s.name(), "unchanged, skipped");
                StageRecord {
                    stage: s,
                    status: StageStatus::Skipped,
                    fingerprint: fp,
                    external_inputs: external,
                    output_digest: Some(digest),
                    duration_ms: started.elapsed().as_millis() as u64,
                    error: None,
                }
            }
            None => {
                tracing::info!(stage = s.name(), "running");
                match execute(cfg, &layout, s).and_then(|_| path_digest(&dir)) {
                    Ok(digest) => StageRecord {
                        stage: s,
                        status: StageStatus::Executed,
                        fingerprint: fp,
                        external_inputs: external,
                        output_digest: Some(digest),
                        duration_ms: started.elapsed().as_millis() as u64,
                        error: None,
                    },
                    Err(e) => {
                        let rec = StageRecord {
                            stage: s,
                            status: StageStatus::Failed,
                            fingerprint: fp,
                            external_inputs: external,
                            output_digest: None,
                            duration_ms: started.elapsed().as_millis() as u64,
                            error: Some(e.to_string()),
                        };
                        failure = Some(Error::Stage { stage: s.name().into(), message: e.to_string() });
                        rec
                    }
                }
            }
        };
        manifest.stages.push(record);
        write_json(&manifest_path, &manifest)?;
    }
    write_json(&manifest_path, &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Load the catalog written by the ingest stage of a run.
pub fn run_catalog(out_dir: &Path) -> Result<Catalog> {
    Catalog::load(&out_dir.join(Stage::Ingest.dir_name()))
}
