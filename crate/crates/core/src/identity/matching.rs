use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::index::ActorIndex;
use crate::gateway::FaceEmbedding;

/// Default acceptance radius on unit vectors, equivalent to cosine ≥ 0.5.
pub const DEFAULT_ACCEPT_THRESHOLD: f64 = 1.0;
/// Default detector confidence floor for poster and profile faces.
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.9;

/// Nearest-actor decision for one poster face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub poster_id: String,
    pub face_index: u32,
    pub actor_id: Option<String>,
    /// Distance to the nearest entry; `null` on disk when the index was empty.
    #[serde(serialize_with = "ser_distance", deserialize_with = "de_distance")]
    pub distance: f64,
}

fn ser_distance<S: Serializer>(d: &f64, s: S) -> Result<S::Ok, S::Error> {
    if d.is_finite() {
        s.serialize_f64(*d)
    } else {
        s.serialize_none()
    }
}

fn de_distance<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl MatchResult {
    pub fn is_accepted(&self) -> bool {
        self.actor_id.is_some()
    }
}

pub fn match_face(
    poster_id: &str,
    face_index: u32,
    face: &FaceEmbedding,
    index: &ActorIndex,
    accept_threshold: f64,
) -> MatchResult {
    let (actor_id, distance) = match index.nearest(face) {
        Some((entry, d)) if d <= accept_threshold => (Some(entry.actor_id.clone()), d),
        Some((_, d)) => (None, d),
        None => (None, f64::INFINITY),
    };
    MatchResult {
        poster_id: poster_id.to_string(),
        face_index,
        actor_id,
        distance,
    }
}
