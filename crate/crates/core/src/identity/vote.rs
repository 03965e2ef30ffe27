use serde::{Deserialize, Serialize};

use crate::ethnicity::{Ethnicity, EthnicityModel};
use crate::gateway::EthnicityScores;

/// Scores closer than this fraction of the maximum count as tied.
pub const TIE_RELATIVE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VoteError {
    #[error("no usable profile images")]
    Empty,
    #[error("score vectors come from different models")]
    MixedModels,
    #[error("score vector has {got} entries, model has {want}")]
    Length { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub model: EthnicityModel,
    /// Mean of the per-image scores, renormalized to sum to 1.
    pub averaged_scores: Vec<f64>,
    pub voted: Ethnicity,
}

/// Index of the maximum; near-ties resolve to the earliest category.
pub fn argmax_with_ties(values: &[f64]) -> Option<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let eps = TIE_RELATIVE_EPSILON * max.abs();
    values.iter().position(|v| max - v <= eps)
}

/// Average raw per-image vectors for one model. Vectors need not be normalized.
pub fn vote_raw(model: EthnicityModel, per_image: &[Vec<f64>]) -> Result<Vote, VoteError> {
    let want = model.categories().len();
    if per_image.is_empty() {
        return Err(VoteError::Empty);
    }
    let mut mean = vec![0.0; want];
    for v in per_image {
        if v.len() != want {
            return Err(VoteError::Length { got: v.len(), want });
        }
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= per_image.len() as f64);
    let total: f64 = mean.iter().sum();
    if total > 0.0 {
        mean.iter_mut().for_each(|m| *m /= total);
    }
    let best = argmax_with_ties(&mean).ok_or(VoteError::Empty)?;
    Ok(Vote {
        model,
        voted: model.categories()[best],
        averaged_scores: mean,
    })
}

pub fn vote_ethnicity(per_image: &[&EthnicityScores]) -> Result<Vote, VoteError> {
    let first = per_image.first().ok_or(VoteError::Empty)?;
    let model = first.model();
    if per_image.iter().any(|s| s.model() != model) {
        return Err(VoteError::MixedModels);
    }
    let raw: Vec<Vec<f64>> = per_image.iter().map(|s| s.values().to_vec()).collect();
    vote_raw(model, &raw)
}

/// One line of the actor ethnicity output; `voted` is null for unknown actors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorEthnicity {
    pub actor_id: String,
    pub model: EthnicityModel,
    pub images_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaged_scores: Option<std::collections::BTreeMap<Ethnicity, f64>>,
    pub voted: Option<Ethnicity>,
}

impl ActorEthnicity {
    pub fn from_scores(actor_id: &str, model: EthnicityModel, per_image: &[&EthnicityScores]) -> Result<Self, VoteError> {
        match vote_ethnicity(per_image) {
            Ok(v) => {
                if v.model != model {
                    return Err(VoteError::MixedModels);
                }
                Ok(ActorEthnicity {
                    actor_id: actor_id.to_string(),
                    model,
                    images_used: per_image.len(),
                    averaged_scores: Some(model.categories().iter().copied().zip(v.averaged_scores).collect()),
                    voted: Some(v.voted),
                })
            }
            Err(VoteError::Empty) => Ok(ActorEthnicity {
                actor_id: actor_id.to_string(),
                model,
                images_used: 0,
                averaged_scores: None,
                voted: None,
            }),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four(v: [f64; 4]) -> EthnicityScores {
        EthnicityScores::new(EthnicityModel::FourClass, v.to_vec()).unwrap()
    }

    #[test]
    fn mean_decides() {
        let a = four([0.6, 0.1, 0.1, 0.2]);
        let b = four([0.1, 0.1, 0.1, 0.7]);
        let c = four([0.5, 0.1, 0.1, 0.3]);
        let v = vote_ethnicity(&[&a, &b, &c]).unwrap();
        // means: Asian .4, Black .1, Indian .1, White .4 → tie → Asian
        assert_eq!(v.voted, Ethnicity::Asian);
        let v = vote_ethnicity(&[&a, &b]).unwrap();
        assert_eq!(v.voted, Ethnicity::White);
    }

    #[test]
    fn empty_is_unknown() {
        assert_eq!(vote_ethnicity(&[]), Err(VoteError::Empty));
        let a = ActorEthnicity::from_scores("nm1", EthnicityModel::FourClass, &[]).unwrap();
        assert_eq!(a.voted, None);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"voted\":null"));
    }

    #[test]
    fn mixed_models_rejected() {
        let a = four([0.25; 4]);
        let b = EthnicityScores::new(EthnicityModel::SevenClass, vec![1.0 / 7.0; 7]).unwrap();
        assert_eq!(vote_ethnicity(&[&a, &b]), Err(VoteError::MixedModels));
    }

    #[test]
    fn single_image_is_its_own_argmax() {
        let a = four([0.1, 0.2, 0.6, 0.1]);
        assert_eq!(vote_ethnicity(&[&a]).unwrap().voted, Ethnicity::Indian);
    }

    proptest! {
        #[test]
        fn positive_scaling_does_not_change_vote(
            raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 1..6),
            scale in 0.1f64..100.0,
        ) {
            let base = vote_raw(EthnicityModel::FourClass, &raw).unwrap();
            let scaled: Vec<Vec<f64>> = raw.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect();
            prop_assert_eq!(base.voted, vote_raw(EthnicityModel::FourClass, &scaled).unwrap().voted);
        }

        #[test]
        fn averaged_scores_sum_to_one(raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 7), 1..6)) {
            let v = vote_raw(EthnicityModel::SevenClass, &raw).unwrap();
            let s: f64 = v.averaged_scores.iter().sum();
            prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
        }
    }
}
