//! Census population shares per decade and parity ratios against them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ethnicity::Ethnicity;

/// US census shares 1960-2020, race alone, as shipped with the crate.
pub const BUNDLED_CENSUS_CSV: &str = include_str!("../../assets/census_us_v1.csv");
pub const BUNDLED_CENSUS_VERSION: &str = "census_us_v1";

/// Census-side category set that model categories are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CensusCategory {
    Asian,
    Black,
    Other,
    White,
}

impl CensusCategory {
    pub const ALL: [CensusCategory; 4] = [
        CensusCategory::Asian,
        CensusCategory::Black,
        CensusCategory::Other,
        CensusCategory::White,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CensusCategory::Asian => "Asian",
            CensusCategory::Black => "Black",
            CensusCategory::Other => "Other",
            CensusCategory::White => "White",
        }
    }

    /// Census category a raw census label pools into.
    pub fn from_census_label(label: &str) -> CensusCategory {
        match label.trim().to_ascii_lowercase().as_str() {
            "white" => CensusCategory::White,
            "black" | "black or african american" => CensusCategory::Black,
            "asian" => CensusCategory::Asian,
            _ => CensusCategory::Other,
        }
    }

    /// Census category that a model category is compared against.
    pub fn for_ethnicity(e: Ethnicity) -> CensusCategory {
        match e {
            Ethnicity::White | Ethnicity::MiddleEastern => CensusCategory::White,
            Ethnicity::Black => CensusCategory::Black,
            Ethnicity::Asian | Ethnicity::Indian | Ethnicity::EastAsian | Ethnicity::SoutheastAsian => {
                CensusCategory::Asian
            }
            Ethnicity::LatinoHispanic => CensusCategory::Other,
        }
    }
}

impl fmt::Display for CensusCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One `decade,category,fraction` line of a census CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCensusRow {
    pub decade: i32,
    pub category: String,
    pub fraction: f64,
}

/// Shares over [`CensusCategory::ALL`] for one decade; sums to 1.
pub type CensusDistribution = BTreeMap<CensusCategory, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct CensusTable {
    decades: BTreeMap<i32, CensusDistribution>,
}

/// Result of looking a year up; `fallback` is set when an earlier decade stood in.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusLookup<'a> {
    pub requested_decade: i32,
    pub census_decade: i32,
    pub fallback: bool,
    pub shares: &'a CensusDistribution,
}

pub fn decade_of(year: i32) -> i32 {
    year.div_euclid(10) * 10
}

pub fn read_census_rows(text: &str, origin: &Path) -> Result<Vec<RawCensusRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize::<RawCensusRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        let bad = |m: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 2,
            message: m.to_string(),
        };
        if row.decade % 10 != 0 {
            return Err(bad("decade is not a multiple of 10"));
        }
        if !(0.0..=1.0).contains(&row.fraction) {
            return Err(bad("fraction outside [0, 1]"));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Pool raw census categories into [`CensusCategory`] and renormalize each decade.
pub fn map_census_categories(rows: &[RawCensusRow]) -> Result<CensusTable> {
    let mut decades: BTreeMap<i32, CensusDistribution> = BTreeMap::new();
    for row in rows {
        let d = decades
            .entry(row.decade)
            .or_insert_with(|| CensusCategory::ALL.iter().map(|c| (*c, 0.0)).collect());
        *d.get_mut(&CensusCategory::from_census_label(&row.category)).unwrap() += row.fraction;
    }
    for (decade, dist) in decades.iter_mut() {
        let total: f64 = dist.values().sum();
        if total <= 0.0 {
            return Err(Error::Invalid(format!("census decade {decade} has no population")));
        }
        dist.values_mut().for_each(|v| *v /= total);
    }
    Ok(CensusTable { decades })
}

impl CensusTable {
    pub fn bundled() -> CensusTable {
        let rows = read_census_rows(BUNDLED_CENSUS_CSV, Path::new(BUNDLED_CENSUS_VERSION)).expect("bundled census parses");
        map_census_categories(&rows).expect("bundled census is valid")
    }

    pub fn load(path: &Path) -> Result<CensusTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        map_census_categories(&read_census_rows(&text, path)?)
    }

    pub fn decades(&self) -> impl Iterator<Item = (i32, &CensusDistribution)> {
        self.decades.iter().map(|(d, v)| (*d, v))
    }

    /// Census for the decade containing `year`, else the nearest earlier decade.
    pub fn lookup(&self, year: i32) -> Option<CensusLookup<'_>> {
        let requested = decade_of(year);
        let (census_decade, shares) = self.decades.range(..=requested).next_back()?;
        Some(CensusLookup {
            requested_decade: requested,
            census_decade: *census_decade,
            fallback: *census_decade != requested,
            shares,
        })
    }
}

/// Pool model-category fractions into census categories.
pub fn pool_representation(representation: &BTreeMap<Ethnicity, f64>) -> CensusDistribution {
    let mut out: CensusDistribution = CensusCategory::ALL.iter().map(|c| (*c, 0.0)).collect();
    for (e, v) in representation {
        *out.get_mut(&CensusCategory::for_ethnicity(*e)).unwrap() += v;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub requested_decade: i32,
    pub census_decade: i32,
    pub fallback: bool,
    pub representation: CensusDistribution,
    /// representation ÷ census share; null where the census share is 0.
    pub ratio: BTreeMap<CensusCategory, Option<f64>>,
    /// Same ratio with Other dropped from the census and the rest renormalized.
    pub ratio_excluding_other: BTreeMap<CensusCategory, Option<f64>>,
}

pub fn ratio_against(representation: &CensusDistribution, census: &CensusDistribution) -> BTreeMap<CensusCategory, Option<f64>> {
    CensusCategory::ALL
        .iter()
        .map(|c| {
            let share = census.get(c).copied().unwrap_or(0.0);
            let rep = representation.get(c).copied().unwrap_or(0.0);
            let r = if share > 0.0 {
                Some(rep / share)
            } else {
                tracing::debug!(category = %c, "census share is zero, parity ratio undefined");
                None
            };
            (*c, r)
        })
        .collect()
}

pub fn parity_ratio(representation: &BTreeMap<Ethnicity, f64>, census: &CensusTable, year: i32) -> Option<ParityRow> {
    let lookup = census.lookup(year)?;
    let pooled = pool_representation(representation);
    let ratio = ratio_against(&pooled, lookup.shares);

    let main: f64 = lookup
        .shares
        .iter()
        .filter(|(c, _)| **c != CensusCategory::Other)
        .map(|(_, v)| v)
        .sum();
    let mut without_other: CensusDistribution = lookup
        .shares
        .iter()
        .map(|(c, v)| (*c, if *c == CensusCategory::Other || main == 0.0 { 0.0 } else { v / main }))
        .collect();
    without_other.insert(CensusCategory::Other, 0.0);
    let mut ratio_excluding_other = ratio_against(&pooled, &without_other);
    ratio_excluding_other.remove(&CensusCategory::Other);

    Some(ParityRow {
        requested_decade: lookup.requested_decade,
        census_decade: lookup.census_decade,
        fallback: lookup.fallback,
        representation: pooled,
        ratio,
        ratio_excluding_other,
    })
}
