use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::matching::MatchResult;

/// Manually labelled identity of one poster face; `actor_id` is null for extras.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub poster_id: String,
    pub face_index: u32,
    pub actor_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    /// Labelled faces that went through matching.
    pub detected: usize,
    pub accepted: usize,
    pub correct: usize,
    /// correct / accepted; null when nothing was accepted.
    pub verification_rate: Option<f64>,
    /// accepted / detected; null when nothing was detected.
    pub identification_rate: Option<f64>,
    /// Labels with no corresponding match result.
    pub unmatched_labels: usize,
}

pub fn evaluate_matching(truth: &[TruthLabel], matches: &[MatchResult]) -> MatchingReport {
    let labels: HashMap<(&str, u32), Option<&str>> = truth
        .iter()
        .map(|t| ((t.poster_id.as_str(), t.face_index), t.actor_id.as_deref()))
        .collect();
    let (mut detected, mut accepted, mut correct) = (0, 0, 0);
    for m in matches {
        let Some(label) = labels.get(&(m.poster_id.as_str(), m.face_index)) else {
            continue;
        };
        detected += 1;
        if let Some(actor) = m.actor_id.as_deref() {
            accepted += 1;
            if *label == Some(actor) {
                correct += 1;
            }
        }
    }
    let ratio = |n: usize, d: usize| (d > 0).then(|| n as f64 / d as f64);
    MatchingReport {
        detected,
        accepted,
        correct,
        verification_rate: ratio(correct, accepted),
        identification_rate: ratio(accepted, detected),
        unmatched_labels: labels.len() - detected.min(labels.len()),
    }
}
