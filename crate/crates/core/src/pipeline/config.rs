use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ethnicity::EthnicityModel;
use crate::gateway::DEFAULT_SHARD_SIZE;
use crate::identity::{IndexScope, DEFAULT_ACCEPT_THRESHOLD, DEFAULT_CONFIDENCE_FLOOR, DEFAULT_TOP_K};
use crate::imageprep::{DEFAULT_DEDUP_THRESHOLD, DEFAULT_GRAYSCALE_TOLERANCE};
use crate::metrics::{LanguageFilter, DEFAULT_MAX_RANK};

/// Environment variables `POSTERLENS_<SECTION>_<KEY>` override config keys.
pub const ENV_PREFIX: &str = "POSTERLENS_";
const SECTIONS: [&str; 7] = ["paths", "ingest", "dedup", "grayscale", "inference", "matching", "analyze"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub movie_dump: PathBuf,
    pub out_dir: PathBuf,
    /// Fetch cache; defaults to `<out_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Census CSV; the bundled table when absent.
    #[serde(default)]
    pub census: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Serve a recorded cassette.
    Replay,
    /// Call the live services.
    Live,
    /// Cache only.
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub source: SourceKind,
    pub cassette: Option<PathBuf>,
    pub min_votes: u64,
    pub exclude_animated: bool,
    pub max_year: i32,
    pub retry_attempts: u32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            source: SourceKind::Offline,
            cassette: None,
            min_votes: 1000,
            exclude_animated: true,
            max_year: 2100,
            retry_attempts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub threshold: u32,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig { threshold: DEFAULT_DEDUP_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrayscaleConfig {
    pub tolerance: f64,
}

impl Default for GrayscaleConfig {
    fn default() -> Self {
        GrayscaleConfig { tolerance: DEFAULT_GRAYSCALE_TOLERANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Sidecar,
}

mod model_name {
    use super::*;
    pub fn serialize<S: serde::Serializer>(m: &EthnicityModel, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(m.cli_name())
    }
    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<EthnicityModel, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub backend: BackendKind,
    /// Sidecar command line, for the sidecar backend.
    pub command: Option<String>,
    pub mock_plan: Option<PathBuf>,
    pub mock_seed: u64,
    pub shard_size: usize,
    #[serde(with = "model_name")]
    pub ethnicity_model: EthnicityModel,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            backend: BackendKind::Sidecar,
            command: None,
            mock_plan: None,
            mock_seed: 7,
            shard_size: DEFAULT_SHARD_SIZE,
            ethnicity_model: EthnicityModel::FourClass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeKind {
    Whole,
    TopK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    pub scope: ScopeKind,
    pub top_k: u32,
    pub accept_threshold: f64,
    pub confidence_floor: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig {
            scope: ScopeKind::Whole,
            top_k: DEFAULT_TOP_K,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
        }
    }
}

impl MatchingConfig {
    pub fn index_scope(&self) -> IndexScope {
        match self.scope {
            ScopeKind::Whole => IndexScope::WholeCast,
            ScopeKind::TopK => IndexScope::TopK(self.top_k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub language: LanguageFilter,
    pub max_rank: u32,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            language: LanguageFilter::All,
            max_rank: DEFAULT_MAX_RANK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub paths: PathsConfig,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub dedup: DedupConfig,
    #[serde(default)]
    pub grayscale: GrayscaleConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub matching: MatchingConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
}

fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply `POSTERLENS_<SECTION>_<KEY>=value` pairs onto a parsed config tree.
pub fn apply_env_overrides<I: IntoIterator<Item = (String, String)>>(tree: &mut toml::Table, vars: I) -> Vec<String> {
    let mut applied = Vec::new();
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        let Some(section) = SECTIONS.iter().find(|s| rest.starts_with(&format!("{s}_"))) else {
            continue;
        };
        let key = &rest[section.len() + 1..];
        let table = tree
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = table {
            t.insert(key.to_string(), env_value(&raw));
            applied.push(format!("{section}.{key}"));
        }
    }
    applied.sort();
    applied
}

impl Config {
    /// Parse `text`, apply overrides, resolve relative paths against `base_dir`.
    pub fn from_toml<I: IntoIterator<Item = (String, String)>>(text: &str, base_dir: &Path, env: I) -> Result<Config> {
        let mut tree: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for key in apply_env_overrides(&mut tree, env) {
            tracing::info!(key, "config key overridden from the environment");
        }
        let mut cfg: Config = toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.resolve(base_dir);
        Ok(cfg)
    }

    /// Load a config file, honouring the process environment.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::from_toml(&text, &base, std::env::vars())
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.movie_dump);
        fix(&mut self.paths.out_dir);
        self.paths.cache_dir.as_mut().map(fix);
        self.paths.census.as_mut().map(fix);
        self.ingest.cassette.as_mut().map(fix);
        self.inference.mock_plan.as_mut().map(fix);
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.paths.cache_dir.clone().unwrap_or_else(|| self.paths.out_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.paths.movie_dump.exists() {
            return bad(format!("movie dump {} does not exist", self.paths.movie_dump.display()));
        }
        if let Some(c) = &self.paths.census {
            if !c.is_file() {
                return bad(format!("census {} does not exist", c.display()));
            }
        }
        if self.ingest.source == SourceKind::Replay && !self.ingest.cassette.as_ref().is_some_and(|c| c.is_dir()) {
            return bad("ingest.source = replay needs an existing ingest.cassette directory".into());
        }
        if self.dedup.threshold > 64 {
            return bad(format!("dedup.threshold {} exceeds 64", self.dedup.threshold));
        }
        if self.grayscale.tolerance.is_nan() || self.grayscale.tolerance < 0.0 {
            return bad("grayscale.tolerance must be non-negative".into());
        }
        match self.inference.backend {
            BackendKind::Mock if !self.inference.mock_plan.as_ref().is_some_and(|p| p.is_file()) => {
                return bad("inference.backend = mock needs an existing inference.mock_plan".into());
            }
            BackendKind::Sidecar if self.inference.command.as_deref().is_none_or(|c| c.trim().is_empty()) => {
                return bad("inference.backend = sidecar needs inference.command".into());
            }
            _ => {}
        }
        if self.inference.shard_size == 0 {
            return bad("inference.shard_size must be positive".into());
        }
        if !(self.matching.accept_threshold > 0.0 && self.matching.accept_threshold <= 2.0) {
            return bad("matching.accept_threshold must lie in (0, 2]".into());
        }
        if !(0.0..=1.0).contains(&self.matching.confidence_floor) {
            return bad("matching.confidence_floor must lie in [0, 1]".into());
        }
        if self.matching.top_k == 0 || self.analyze.max_rank == 0 {
            return bad("matching.top_k and analyze.max_rank must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[paths]\nmovie_dump = \"dump\"\nout_dir = \"out\"\n";

    #[test]
    fn defaults_match_documented_thresholds() {
        let c = Config::from_toml(MINIMAL, Path::new("/base"), []).unwrap();
        assert_eq!(c.dedup.threshold, 16);
        assert_eq!(c.grayscale.tolerance, 10.0);
        assert_eq!(c.matching.accept_threshold, 1.0);
        assert_eq!(c.matching.confidence_floor, 0.9);
        assert_eq!(c.matching.top_k, 10);
        assert_eq!(c.paths.out_dir, Path::new("/base/out"));
        assert_eq!(c.cache_dir(), Path::new("/base/out/cache"));
    }

    #[test]
    fn environment_overrides_win() {
        let env = [
            ("POSTERLENS_DEDUP_THRESHOLD".to_string(), "8".to_string()),
            ("POSTERLENS_MATCHING_SCOPE".to_string(), "top-k".to_string()),
            ("POSTERLENS_INFERENCE_ETHNICITY_MODEL".to_string(), "seven".to_string()),
            ("POSTERLENS_LOG".to_string(), "debug".to_string()),
            ("OTHER_DEDUP_THRESHOLD".to_string(), "1".to_string()),
        ];
        let c = Config::from_toml(MINIMAL, Path::new("/b"), env).unwrap();
        assert_eq!(c.dedup.threshold, 8);
        assert_eq!(c.matching.index_scope(), IndexScope::TopK(10));
        assert_eq!(c.inference.ethnicity_model, EthnicityModel::SevenClass);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{MINIMAL}[dedup]\nthreshhold = 3\n");
        assert!(matches!(Config::from_toml(&text, Path::new("/"), []), Err(Error::Config(_))));
    }

    #[test]
    fn validation_checks_ranges() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("dump")).unwrap();
        std::fs::write(dir.path().join("plan.json"), "{}").unwrap();
        let text = format!("{MINIMAL}[inference]\nbackend = \"mock\"\nmock_plan = \"plan.json\"\n");
        let mut c = Config::from_toml(&text, dir.path(), []).unwrap();
        c.validate().unwrap();
        c.dedup.threshold = 65;
        assert!(c.validate().is_err());
        c.dedup.threshold = 16;
        c.matching.confidence_floor = 1.5;
        assert!(c.validate().is_err());
    }
}
