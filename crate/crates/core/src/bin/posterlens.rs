use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use posterlens::gateway::{
    Bundle, IdentityPlan, InferenceBackend, InferenceRequest, ManifestEntry, MockBackend, SidecarBackend, TaskSet,
};
use posterlens::identity::{evaluate_matching, IndexScope, MatchOptions, MatchResult, TruthLabel};
use posterlens::ingestion::{
    ingest, ActorProfileRaw, DisabledClient, IngestOptions, LiveClient, LiveConfig, MetadataClient, MovieFilter,
    RecordingClient, ReplayClient, RetryPolicy, ACTORS_FILE, POSTERS_FILE,
};
use posterlens::io::{read_json, read_jsonl};
use posterlens::metrics::{AnalyzeOptions, LanguageFilter, DEFAULT_MAX_RANK};
use posterlens::pipeline::stages::*;
use posterlens::pipeline::{run_pipeline, Config, RunOptions};
use posterlens::synthetic::{write_corpus, SynthOptions};
use posterlens::{Error, EthnicityModel, Result};

fn long_version() -> &'static str {
    Box::leak(format!("{} (format {})", posterlens::TOOL_VERSION, posterlens::FORMAT_VERSION).into_boxed_str())
}

#[derive(Parser)]
#[command(name = "posterlens", version = long_version(), about = "Ethnic representation analytics for movie posters")]
struct Cli {
    /// Log filter, e.g. `info` or `posterlens=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read the movie dump, filter it and fetch posters and actor pictures.
    Ingest(IngestArgs),
    /// Hash posters and drop near-duplicates within each movie.
    Dedup(DedupArgs),
    /// Drop grayscale actor profile pictures.
    GrayscaleFilter(GrayArgs),
    /// Run a face-model backend over kept posters and actor pictures.
    Infer(InferArgs),
    /// Deterministic stand-in that speaks the sidecar contract.
    MockSidecar(MockSidecarArgs),
    /// Check a bundle directory against the protocol.
    ValidateBundle {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Match poster faces to cast members.
    Match(MatchArgs),
    /// Vote each actor's ethnicity from their profile faces.
    VoteEthnicity(VoteArgs),
    /// Score matches against ground-truth labels.
    EvaluateMatching {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        matches: PathBuf,
    },
    /// Join accepted matches with voted ethnicities into per-face facts.
    Facts(FactsArgs),
    /// Compute every metric table from a facts file.
    Analyze(AnalyzeArgs),
    /// Render metric tables as SVG charts.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        plots: PathBuf,
    },
    /// Run every stage from a config file, skipping unchanged stages.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Re-run stages even when their inputs are unchanged.
        #[arg(long)]
        force: bool,
    },
    /// Write a small synthetic corpus with a ready-to-run config.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Directory holding the dump files, or the basics file itself.
    #[arg(long)]
    movie_dump: PathBuf,
    #[arg(long, default_value_t = 1000)]
    min_votes: u64,
    #[arg(long)]
    exclude_animated: bool,
    #[arg(long, default_value_t = 2100)]
    max_year: i32,
    #[arg(long)]
    out: PathBuf,
    /// Never touch the network; serve from the cassette or the cache.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Record live responses into this cassette directory.
    #[arg(long, conflicts_with = "offline")]
    record: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    retry_attempts: u32,
    #[arg(long, default_value_t = 4.0)]
    requests_per_second: f64,
}

#[derive(Args)]
struct DedupArgs {
    /// Catalog directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 16)]
    threshold: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GrayArgs {
    /// Catalog directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    tolerance: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Posters file (the dedup output).
    #[arg(long)]
    posters: PathBuf,
    /// Actors file (the grayscale-filter output).
    #[arg(long)]
    actors: PathBuf,
    /// Sidecar command line.
    #[arg(long, conflicts_with = "mock_plan", required_unless_present = "mock_plan")]
    backend_cmd: Option<String>,
    /// Use the in-process mock backend with this plan.
    #[arg(long)]
    mock_plan: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    mock_seed: u64,
    #[arg(long, default_value = "four")]
    ethnicity_model: EthnicityModel,
    #[arg(long, default_value_t = posterlens::gateway::DEFAULT_SHARD_SIZE)]
    shard_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MockSidecarArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "detect,embed,ethnicity")]
    tasks: TaskSet,
    #[arg(long, default_value = "four")]
    ethnicity_model: EthnicityModel,
    #[arg(long)]
    out: PathBuf,
    /// Accepted for parity with the real sidecar; ignored.
    #[arg(long)]
    device: Option<String>,
    /// Accepted for parity with the real sidecar; ignored.
    #[arg(long)]
    weights_dir: Option<PathBuf>,
    /// Exit with an error without writing anything.
    #[arg(long, hide = true)]
    fail: bool,
}

#[derive(Args)]
struct CatalogArgs {
    #[arg(long)]
    catalog: PathBuf,
    /// Replacement posters file, usually the dedup output.
    #[arg(long)]
    posters: Option<PathBuf>,
    /// Replacement actors file, usually the grayscale-filter output.
    #[arg(long)]
    actors: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[command(flatten)]
    catalog: CatalogArgs,
    #[arg(long, default_value = "whole")]
    scope: IndexScope,
    #[arg(long, default_value_t = posterlens::identity::DEFAULT_ACCEPT_THRESHOLD)]
    accept_threshold: f64,
    #[arg(long, default_value_t = posterlens::identity::DEFAULT_CONFIDENCE_FLOOR)]
    confidence_floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VoteArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Actors file; actors are recovered from the bundle when absent.
    #[arg(long)]
    actors: Option<PathBuf>,
    #[arg(long)]
    ethnicity_model: Option<EthnicityModel>,
    #[arg(long, default_value_t = posterlens::identity::DEFAULT_CONFIDENCE_FLOOR)]
    confidence_floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FactsArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    votes: PathBuf,
    #[arg(long, default_value_t = posterlens::identity::DEFAULT_CONFIDENCE_FLOOR)]
    confidence_floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    facts: PathBuf,
    /// Census CSV (decade,category,fraction); the bundled table when absent.
    #[arg(long)]
    census: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    language: LanguageFilter,
    #[arg(long, default_value = "four")]
    ethnicity_model: EthnicityModel,
    #[arg(long, default_value_t = DEFAULT_MAX_RANK)]
    max_rank: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthOptions::default().movies)]
    movies: usize,
    #[arg(long, default_value_t = SynthOptions::default().seed)]
    seed: u64,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_actors(path: Option<&Path>, bundle: &Bundle) -> Result<Vec<ActorProfileRaw>> {
    match path {
        Some(p) => read_jsonl(p),
        None => Ok(actors_from_bundle(bundle)),
    }
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let client: Arc<dyn MetadataClient> = match (a.offline, a.cassette) {
        (_, Some(c)) => Arc::new(ReplayClient::new(c)),
        (true, None) => Arc::new(DisabledClient),
        (false, None) => {
            let cfg = LiveConfig::from_env(a.requests_per_second)
                .ok_or_else(|| Error::Config("live ingestion needs TMDB_API_KEY (or pass --offline)".into()))?;
            match a.record {
                Some(dir) => Arc::new(RecordingClient::new(LiveClient::new(cfg), dir)),
                None => Arc::new(LiveClient::new(cfg)),
            }
        }
    };
    let opts = IngestOptions {
        cache_dir: a.cache_dir.unwrap_or_else(|| a.out.join("cache")),
        movie_dump: a.movie_dump,
        filter: MovieFilter { min_votes: a.min_votes, exclude_animated: a.exclude_animated },
        out_dir: a.out,
        retry: RetryPolicy { max_attempts: a.retry_attempts.max(1), ..Default::default() },
        max_year: a.max_year,
    };
    print_json(&ingest(&opts, client)?)
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let posters = read_jsonl(&a.posters)?;
    let actors = read_jsonl(&a.actors)?;
    let backend: Box<dyn InferenceBackend> = match (&a.backend_cmd, &a.mock_plan) {
        (_, Some(plan)) => Box::new(MockBackend::new(a.mock_seed, read_json::<IdentityPlan>(plan)?)),
        (Some(cmd), None) => {
            Box::new(SidecarBackend::from_command_line(cmd).ok_or_else(|| Error::Config("empty --backend-cmd".into()))?)
        }
        (None, None) => unreachable!("clap requires one backend"),
    };
    let request = InferenceRequest { tasks: TaskSet::ALL, ethnicity_model: a.ethnicity_model };
    let failures = inference_stage(&posters, &actors, backend.as_ref(), &request, a.shard_size, &a.out)?;
    for f in &failures {
        eprintln!("shard {} failed twice ({} images): {}", f.shard, f.image_refs.len(), f.error);
    }
    Ok(())
}

fn cmd_mock_sidecar(a: MockSidecarArgs) -> Result<()> {
    if a.fail {
        return Err(Error::Invalid("planted failure".into()));
    }
    let plan: IdentityPlan = read_json(&a.plan)?;
    let entries: Vec<ManifestEntry> = read_jsonl(&a.manifest)?;
    let request = InferenceRequest { tasks: a.tasks, ethnicity_model: a.ethnicity_model };
    let mut bundle = MockBackend::new(a.seed, plan)
        .infer(&entries, &request)
        .map_err(|e| Error::Invalid(e.to_string()))?;
    bundle.write_dir_atomic(&a.out)
}

fn cmd_validate(bundle: &Path) -> Result<()> {
    let b = Bundle::read(bundle)?;
    b.validate()?;
    println!(
        "ok: {} images, {} faces, {} embeddings, {} score vectors",
        b.detections.len(),
        b.detections.iter().map(|d| d.faces.len()).sum::<usize>(),
        b.embeddings.len(),
        b.scores.len()
    );
    Ok(())
}

fn cmd_match(a: MatchArgs) -> Result<()> {
    let bundle = Bundle::read(&a.bundle)?;
    let (movies, posters, actors) =
        load_catalog_parts(&a.catalog.catalog, a.catalog.posters.as_deref(), a.catalog.actors.as_deref())?;
    let opts = MatchOptions {
        scope: a.scope,
        accept_threshold: a.accept_threshold,
        confidence_floor: a.confidence_floor,
    };
    let (_, stats) = match_stage(&movies, &posters, &actors, &bundle, &opts, &a.out)?;
    print_json(&stats)
}

fn cmd_vote(a: VoteArgs) -> Result<()> {
    let bundle = Bundle::read(&a.bundle)?;
    let actors = read_actors(a.actors.as_deref(), &bundle)?;
    let votes = vote_stage(&actors, &bundle, a.ethnicity_model, a.confidence_floor, &a.out)?;
    let voted = votes.iter().filter(|v| v.voted.is_some()).count();
    println!("{voted} of {} actors voted", votes.len());
    Ok(())
}

fn cmd_evaluate(truth: &Path, matches: &Path) -> Result<()> {
    let truth: Vec<TruthLabel> = read_jsonl(truth)?;
    let matches: Vec<MatchResult> = read_jsonl(matches)?;
    print_json(&evaluate_matching(&truth, &matches))
}

fn cmd_facts(a: FactsArgs) -> Result<()> {
    let (movies, posters, _) = load_catalog_parts(&a.catalog.catalog, a.catalog.posters.as_deref(), None)?;
    let bundle = Bundle::read(&a.bundle)?;
    let matches: Vec<MatchResult> = read_jsonl(&a.matches)?;
    let votes = read_jsonl(&a.votes)?;
    let (_, coverage) = facts_stage(&movies, &posters, &bundle, &matches, &votes, a.confidence_floor, &a.out)?;
    print_json(&coverage)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let opts = AnalyzeOptions { model: a.ethnicity_model, language: a.language, max_rank: a.max_rank };
    let analysis = analyze_stage(&a.facts, a.census.as_deref(), &opts, &a.out)?;
    print_json(&analysis.summary)
}

fn cmd_report(metrics: &Path, plots: &Path) -> Result<()> {
    for p in posterlens::report::render_report(metrics, plots)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_run(config: &Path, force: bool) -> Result<()> {
    let cfg = Config::load(config)?;
    let manifest = run_pipeline(&cfg, &RunOptions { force })?;
    for r in &manifest.stages {
        println!("{:<10} {:?} ({} ms)", r.stage.name(), r.status, r.duration_ms);
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let opts = SynthOptions { movies: a.movies, seed: a.seed, ..Default::default() };
    let corpus = write_corpus(&a.out, &opts)?;
    println!("{}", corpus.config_path.display());
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Dedup(a) => {
            let posters = read_jsonl(&a.input.join(POSTERS_FILE))?;
            print_json(&dedup_stage(&posters, a.threshold, &a.out)?)
        }
        Command::GrayscaleFilter(a) => {
            let actors = read_jsonl(&a.input.join(ACTORS_FILE))?;
            print_json(&grayscale_stage(&actors, a.tolerance, &a.out)?)
        }
        Command::Infer(a) => cmd_infer(a),
        Command::MockSidecar(a) => cmd_mock_sidecar(a),
        Command::ValidateBundle { bundle } => cmd_validate(&bundle),
        Command::Match(a) => cmd_match(a),
        Command::VoteEthnicity(a) => cmd_vote(a),
        Command::EvaluateMatching { truth, matches } => cmd_evaluate(&truth, &matches),
        Command::Facts(a) => cmd_facts(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Report { metrics, plots } => cmd_report(&metrics, &plots),
        Command::Run { config, force } => cmd_run(&config, force),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(&cli.log))
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
