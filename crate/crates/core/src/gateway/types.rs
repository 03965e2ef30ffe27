use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ethnicity::{Ethnicity, EthnicityModel};

pub const EMBEDDING_DIM: usize = 512;
pub const NORM_TOLERANCE: f32 = 1e-4;
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("{file}: bad magic, expected EMB1")]
    BadMagic { file: String },
    #[error("{file}: expected {expected} bytes, found {actual}")]
    Length { file: String, expected: u64, actual: u64 },
    #[error("embedding dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("embedding index lists {index} entries but the file holds {count}")]
    IndexCount { index: usize, count: usize },
    #[error("embedding {ordinal} has norm {norm}")]
    NotNormalized { ordinal: usize, norm: f32 },
    #[error("scores for {image_ref}#{face_index}: {reason}")]
    Scores { image_ref: String, face_index: u32, reason: String },
    #[error("{image_ref}#{face_index}: bbox {bbox} outside {width}x{height}")]
    BBox { image_ref: String, face_index: u32, bbox: String, width: u32, height: u32 },
    #[error("{image_ref}#{face_index}: confidence {confidence} outside [0, 1]")]
    Confidence { image_ref: String, face_index: u32, confidence: f64 },
    #[error("{image_ref}#{face_index}: {reason}")]
    Face { image_ref: String, face_index: u32, reason: String },
    #[error("{0}")]
    Other(String),
}

/// Pixel box with top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn is_within(&self, width: u32, height: u32) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.w <= width as f64
            && self.y + self.h <= height as f64
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceDetection {
    pub face_index: u32,
    pub bbox: BBox,
    pub confidence: f64,
}

/// One line of `detections.jsonl`; present for every manifest image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub image_ref: String,
    pub width: u32,
    pub height: u32,
    pub faces: Vec<FaceDetection>,
}

/// Unit-length face embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceEmbedding(Vec<f32>);

impl FaceEmbedding {
    /// Accepts a vector already normalized within [`NORM_TOLERANCE`].
    pub fn new(values: Vec<f32>) -> Result<Self, ProtocolError> {
        let norm = l2(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(ProtocolError::NotNormalized { ordinal: 0, norm });
        }
        Ok(FaceEmbedding(values))
    }

    /// Scale to unit length. A zero vector stays zero and will fail validation.
    pub fn normalized(mut values: Vec<f32>) -> Self {
        let norm = l2(&values);
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        FaceEmbedding(values)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &FaceEmbedding) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = *a as f64 - *b as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine(&self, other: &FaceEmbedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| *a as f64 * *b as f64).sum()
    }
}

fn l2(v: &[f32]) -> f32 {
    v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt() as f32
}

/// Classifier output over one model's category set, stored in category order.
#[derive(Debug, Clone, PartialEq)]
pub struct EthnicityScores {
    model: EthnicityModel,
    scores: Vec<f64>,
}

impl EthnicityScores {
    /// Scores in `model.categories()` order; must lie on the simplex.
    pub fn new(model: EthnicityModel, scores: Vec<f64>) -> Result<Self, String> {
        let n = model.categories().len();
        if scores.len() != n {
            return Err(format!("expected {n} scores, got {}", scores.len()));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(format!("score {s} outside [0, 1]"));
        }
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(format!("scores sum to {sum}"));
        }
        Ok(EthnicityScores { model, scores })
    }

    pub fn from_map(model: EthnicityModel, map: &BTreeMap<Ethnicity, f64>) -> Result<Self, String> {
        let keys: Vec<Ethnicity> = map.keys().copied().collect();
        if keys != model.categories() {
            return Err(format!(
                "categories {:?} do not match the {} model",
                keys.iter().map(|k| k.label()).collect::<Vec<_>>(),
                model.cli_name()
            ));
        }
        Self::new(model, map.values().copied().collect())
    }

    pub fn model(&self) -> EthnicityModel {
        self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, category: Ethnicity) -> Option<f64> {
        self.model.position(category).map(|i| self.scores[i])
    }

    pub fn to_map(&self) -> BTreeMap<Ethnicity, f64> {
        self.model.categories().iter().copied().zip(self.scores.iter().copied()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ScoresWire {
    model: EthnicityModel,
    scores: BTreeMap<Ethnicity, f64>,
}

impl Serialize for EthnicityScores {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ScoresWire {
            model: self.model,
            scores: self.to_map(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EthnicityScores {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = ScoresWire::deserialize(d)?;
        EthnicityScores::from_map(wire.model, &wire.scores).map_err(serde::de::Error::custom)
    }
}

/// One line of `ethnicity.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceScores {
    pub image_ref: String,
    pub face_index: u32,
    #[serde(flatten)]
    pub scores: EthnicityScores,
}

/// One line of `embeddings.index.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingKey {
    pub ordinal: usize,
    pub image_ref: String,
    pub face_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detect,
    Embed,
    Ethnicity,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Detect => "detect",
            Task::Embed => "embed",
            Task::Ethnicity => "ethnicity",
        }
    }
}

/// Requested tasks. Detection is always performed since the others key off it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub embed: bool,
    pub ethnicity: bool,
}

impl TaskSet {
    pub const ALL: TaskSet = TaskSet {
        embed: true,
        ethnicity: true,
    };

    pub fn tasks(&self) -> Vec<Task> {
        let mut t = vec![Task::Detect];
        if self.embed {
            t.push(Task::Embed);
        }
        if self.ethnicity {
            t.push(Task::Ethnicity);
        }
        t
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.tasks().iter().map(|t| t.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for TaskSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = TaskSet {
            embed: false,
            ethnicity: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "detect" => {}
                "embed" => set.embed = true,
                "ethnicity" => set.ethnicity = true,
                other => return Err(format!("unknown task `{other}`")),
            }
        }
        Ok(set)
    }
}

/// What a backend is asked to produce for one shard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub tasks: TaskSet,
    pub ethnicity_model: EthnicityModel,
}

impl Default for InferenceRequest {
    fn default() -> Self {
        InferenceRequest {
            tasks: TaskSet::ALL,
            ethnicity_model: EthnicityModel::FourClass,
        }
    }
}
