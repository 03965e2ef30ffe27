use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Ethnic category label produced by either classifier.
///
/// Variant order is alphabetical by label, which is also the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ethnicity {
    #[serde(rename = "Asian")]
    Asian,
    #[serde(rename = "Black")]
    Black,
    #[serde(rename = "East Asian")]
    EastAsian,
    #[serde(rename = "Indian")]
    Indian,
    #[serde(rename = "Latino-Hispanic")]
    LatinoHispanic,
    #[serde(rename = "Middle Eastern")]
    MiddleEastern,
    #[serde(rename = "Southeast Asian")]
    SoutheastAsian,
    #[serde(rename = "White")]
    White,
}

impl Ethnicity {
    pub const ALL: [Ethnicity; 8] = [
        Ethnicity::Asian,
        Ethnicity::Black,
        Ethnicity::EastAsian,
        Ethnicity::Indian,
        Ethnicity::LatinoHispanic,
        Ethnicity::MiddleEastern,
        Ethnicity::SoutheastAsian,
        Ethnicity::White,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Ethnicity::Asian => "Asian",
            Ethnicity::Black => "Black",
            Ethnicity::EastAsian => "East Asian",
            Ethnicity::Indian => "Indian",
            Ethnicity::LatinoHispanic => "Latino-Hispanic",
            Ethnicity::MiddleEastern => "Middle Eastern",
            Ethnicity::SoutheastAsian => "Southeast Asian",
            Ethnicity::White => "White",
        }
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown ethnicity label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for Ethnicity {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ethnicity::ALL
            .iter()
            .copied()
            .find(|e| e.label() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Which classifier produced a score vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EthnicityModel {
    #[default]
    FourClass,
    SevenClass,
}

const FOUR: [Ethnicity; 4] = [
    Ethnicity::Asian,
    Ethnicity::Black,
    Ethnicity::Indian,
    Ethnicity::White,
];

const SEVEN: [Ethnicity; 7] = [
    Ethnicity::Black,
    Ethnicity::EastAsian,
    Ethnicity::Indian,
    Ethnicity::LatinoHispanic,
    Ethnicity::MiddleEastern,
    Ethnicity::SoutheastAsian,
    Ethnicity::White,
];

impl EthnicityModel {
    /// Categories of this model in alphabetical order.
    pub fn categories(self) -> &'static [Ethnicity] {
        match self {
            EthnicityModel::FourClass => &FOUR,
            EthnicityModel::SevenClass => &SEVEN,
        }
    }

    pub fn position(self, category: Ethnicity) -> Option<usize> {
        self.categories().iter().position(|c| *c == category)
    }

    /// Command-line spelling (`four` / `seven`).
    pub fn cli_name(self) -> &'static str {
        match self {
            EthnicityModel::FourClass => "four",
            EthnicityModel::SevenClass => "seven",
        }
    }
}

impl FromStr for EthnicityModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "four" | "FOUR_CLASS" => Ok(EthnicityModel::FourClass),
            "seven" | "SEVEN_CLASS" => Ok(EthnicityModel::SevenClass),
            other => Err(format!("unknown ethnicity model `{other}` (expected four|seven)")),
        }
    }
}
