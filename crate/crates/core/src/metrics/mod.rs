//! Movie-level representation statistics over matched poster faces.

mod facts;
mod ops;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use facts::{build_facts, language_class, FaceFact, FactsCoverage, LanguageClass};
pub use ops::{
    bucket_label, center_distance, conditional_race_given_largest, ethnic_frequency_by_decade, genre_race_tables,
    minority_share, movies_by_language, normalized_center_distance, poster_face_stats, rank_race_ratio,
    relative_face_size, relative_size, unique_actor_buckets, PosterFaceStats, BUCKET_CAP, DEFAULT_MAX_RANK,
};
pub use table::{compensated_sum, mean, CompensatedSum, MetricRow, MetricTable};

use crate::demographics::{parity_ratio, CensusCategory, CensusTable};
use crate::error::{Error, Result};
use crate::ethnicity::{Ethnicity, EthnicityModel};
use crate::io::write_json;

pub const FACTS_FILE: &str = "facts.jsonl";
pub const FACTS_COVERAGE_FILE: &str = "facts_coverage.json";
pub const COVERAGE_FILE: &str = "coverage.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PARITY_TABLE: &str = "parity_ratio";

/// Names of every CSV `analyze` writes, without extension.
pub const TABLE_NAMES: [&str; 10] = [
    "ethnic_frequency_by_decade",
    "relative_face_size",
    "center_distance",
    "unique_actor_buckets",
    "conditional_given_largest",
    "genre_race_distribution",
    "race_genre_distribution",
    "rank_race_ratio",
    "poster_face_stats",
    PARITY_TABLE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LanguageFilter {
    #[default]
    All,
    En,
    NonEn,
}

impl LanguageFilter {
    pub fn admits(self, class: LanguageClass) -> bool {
        match self {
            LanguageFilter::All => true,
            LanguageFilter::En => class == LanguageClass::English,
            LanguageFilter::NonEn => class == LanguageClass::NonEnglish,
        }
    }
}

impl fmt::Display for LanguageFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LanguageFilter::All => "all",
            LanguageFilter::En => "en",
            LanguageFilter::NonEn => "non-en",
        })
    }
}

impl FromStr for LanguageFilter {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(LanguageFilter::All),
            "en" => Ok(LanguageFilter::En),
            "non-en" => Ok(LanguageFilter::NonEn),
            _ => Err(format!("bad language filter `{s}` (expected en, non-en or all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub model: EthnicityModel,
    pub language: LanguageFilter,
    pub max_rank: u32,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            model: EthnicityModel::FourClass,
            language: LanguageFilter::All,
            max_rank: DEFAULT_MAX_RANK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisCoverage {
    pub language: LanguageFilter,
    pub facts_in: usize,
    pub facts_used: usize,
    pub facts_excluded_by_language: usize,
    pub movies: usize,
    pub posters: usize,
    pub single_face_posters_skipped: usize,
    pub census_fallback_decades: Vec<i32>,
    pub census_missing_decades: Vec<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream: Option<FactsCoverage>,
}

/// Headline figures derived from the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub language: LanguageFilter,
    pub movies: usize,
    pub posters: usize,
    pub facts: usize,
    pub poster_face_stats: PosterFaceStats,
    pub minority_share_ranks_1_3: Option<f64>,
    pub minority_share_ranks_4_12: Option<f64>,
    pub latest_decade: Option<i32>,
    pub latest_decade_white_fraction: Option<f64>,
    pub latest_decade_white_parity: Option<f64>,
    /// Mean White relative face size over the mean for other categories, minus 1.
    pub white_relative_size_excess: Option<f64>,
    pub movies_by_language: BTreeMap<LanguageClass, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub tables: Vec<MetricTable>,
    pub summary: Summary,
    pub coverage: AnalysisCoverage,
}

impl Analysis {
    pub fn table(&self, name: &str) -> Option<&MetricTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for t in &self.tables {
            t.write_csv(dir)?;
        }
        write_json(&dir.join(SUMMARY_FILE), &self.summary)?;
        write_json(&dir.join(COVERAGE_FILE), &self.coverage)
    }
}

pub fn validate_categories(facts: &[FaceFact], model: EthnicityModel) -> Result<()> {
    match facts.iter().find(|f| model.position(f.ethnicity).is_none()) {
        Some(f) => Err(Error::Invalid(format!(
            "fact {}#{} has category {} outside the {} model",
            f.poster_id,
            f.face_index,
            f.ethnicity,
            model.cli_name()
        ))),
        None => Ok(()),
    }
}

/// Parity of each decade's frequency row against the census.
pub fn parity_table(frequency: &MetricTable, census: &CensusTable) -> (MetricTable, Vec<i32>, Vec<i32>) {
    let mut reps: BTreeMap<i32, BTreeMap<Ethnicity, f64>> = BTreeMap::new();
    let frac = frequency.column("fraction").unwrap_or(0);
    for row in &frequency.rows {
        let (Ok(decade), Ok(cat)) = (row.keys[0].parse::<i32>(), row.keys[1].parse::<Ethnicity>()) else {
            continue;
        };
        reps.entry(decade).or_default().insert(cat, row.values[frac].unwrap_or(0.0));
    }
    let mut t = MetricTable::new(
        PARITY_TABLE,
        &["decade", "census_decade", "category"],
        &["representation", "census_share", "ratio", "ratio_excluding_other", "fallback"],
        "decade actor shares pooled into census categories over the census share; fallback is 1 when an earlier census stood in",
    );
    let (mut fallback, mut missing) = (Vec::new(), Vec::new());
    for (decade, rep) in reps {
        let Some(row) = parity_ratio(&rep, census, decade) else {
            missing.push(decade);
            continue;
        };
        if row.fallback {
            fallback.push(decade);
        }
        let shares = census.lookup(decade).map(|l| l.shares.clone()).unwrap_or_default();
        for c in CensusCategory::ALL {
            t.push(
                vec![decade.to_string(), row.census_decade.to_string(), c.label().into()],
                vec![
                    Some(row.representation[&c]),
                    shares.get(&c).copied(),
                    row.ratio[&c],
                    row.ratio_excluding_other.get(&c).copied().flatten(),
                    Some(row.fallback as u8 as f64),
                ],
            );
        }
    }
    (t, fallback, missing)
}

fn white_size_excess(facts: &[FaceFact]) -> Option<f64> {
    let (white, other): (Vec<&FaceFact>, Vec<&FaceFact>) = facts.iter().partition(|f| f.ethnicity == Ethnicity::White);
    let w = mean(white.iter().map(|f| relative_size(f)))?;
    let o = mean(other.iter().map(|f| relative_size(f)))?;
    (o > 0.0).then(|| w / o - 1.0)
}

pub fn analyze(facts: &[FaceFact], census: &CensusTable, opts: &AnalyzeOptions) -> Result<Analysis> {
    validate_categories(facts, opts.model)?;
    let used: Vec<FaceFact> = facts
        .iter()
        .filter(|f| opts.language.admits(f.language_class))
        .cloned()
        .collect();
    let cats = opts.model.categories();

    let frequency = ethnic_frequency_by_decade(&used, cats);
    let (conditional, skipped) = conditional_race_given_largest(&used, cats);
    let (genre_a, genre_b) = genre_race_tables(&used, cats);
    let stats = poster_face_stats(&used);
    let (parity, fallback, missing) = parity_table(&frequency, census);

    let latest_decade = used.iter().map(|f| f.decade).max();
    let latest = |t: &MetricTable, key: &str, col: &str| latest_decade.and_then(|d| t.get(&[&d.to_string(), key], col));
    let latest_parity = latest_decade.and_then(|d| {
        parity.rows.iter().find(|r| r.keys[0] == d.to_string() && r.keys[2] == "White").and_then(|r| r.values[2])
    });
    let movies = movies_by_language(&used);
    let summary = Summary {
        language: opts.language,
        movies: movies.values().sum(),
        posters: stats.posters,
        facts: used.len(),
        minority_share_ranks_1_3: minority_share(&used, 1..=3),
        minority_share_ranks_4_12: minority_share(&used, 4..=opts.max_rank.max(4)),
        latest_decade,
        latest_decade_white_fraction: latest(&frequency, "White", "fraction"),
        latest_decade_white_parity: latest_parity,
        white_relative_size_excess: white_size_excess(&used),
        poster_face_stats: stats.clone(),
        movies_by_language: movies,
    };
    let coverage = AnalysisCoverage {
        language: opts.language,
        facts_in: facts.len(),
        facts_used: used.len(),
        facts_excluded_by_language: facts.len() - used.len(),
        movies: summary.movies,
        posters: stats.posters,
        single_face_posters_skipped: skipped,
        census_fallback_decades: fallback,
        census_missing_decades: missing,
        upstream: None,
    };
    let tables = vec![
        frequency,
        relative_face_size(&used, cats),
        center_distance(&used, cats),
        unique_actor_buckets(&used, cats),
        conditional,
        genre_a,
        genre_b,
        rank_race_ratio(&used, cats, opts.max_rank),
        stats.to_table(),
        parity,
    ];
    Ok(Analysis { tables, summary, coverage })
}
