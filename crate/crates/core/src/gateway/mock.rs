//! Deterministic backend that reports planted faces instead of running models.
//!
//! Every planted identity owns a random unit direction; each face of that
//! identity is the direction plus a perturbation of fixed norm
//! [`MOCK_NOISE_NORM`], renormalized. Two faces of one identity therefore sit
//! within `2 * MOCK_NOISE_NORM` of each other, while independent directions in
//! 512 dimensions are almost orthogonal (distance close to √2).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{BackendError, InferenceBackend, ManifestEntry};
use super::bundle::Bundle;
use super::types::*;
use crate::ethnicity::{Ethnicity, EthnicityModel};
use crate::io::read_jsonl;

pub const MOCK_NOISE_NORM: f64 = 0.1;
pub const MOCK_CHECKPOINT: &str = "mock-v1";

fn default_concentration() -> f64 {
    0.9
}

fn default_confidence() -> f64 {
    0.99
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFace {
    pub identity: String,
    pub bbox: BBox,
    pub category: Ethnicity,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePlan {
    /// Pixel size reported for the image; read from the file when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<(u32, u32)>,
    pub faces: Vec<PlantedFace>,
}

/// Planted content keyed by image reference.
pub type IdentityPlan = BTreeMap<String, ImagePlan>;

fn rng_for(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Unit direction owned by a planted identity.
pub fn identity_direction(seed: u64, identity: &str) -> Vec<f64> {
    unit(gaussian(&mut rng_for(seed, &["identity", identity]), EMBEDDING_DIM))
}

/// Embedding of one planted face.
pub fn mock_embedding(seed: u64, identity: &str, image_ref: &str, face_index: u32) -> FaceEmbedding {
    let base = identity_direction(seed, identity);
    let noise = unit(gaussian(
        &mut rng_for(seed, &["noise", image_ref, &face_index.to_string()]),
        EMBEDDING_DIM,
    ));
    let v: Vec<f32> = base
        .iter()
        .zip(&noise)
        .map(|(b, n)| (b + MOCK_NOISE_NORM * n) as f32)
        .collect();
    FaceEmbedding::normalized(v)
}

/// The nearest category available in `model`.
pub fn project_category(category: Ethnicity, model: EthnicityModel) -> Ethnicity {
    if model.position(category).is_some() {
        return category;
    }
    match (model, category) {
        (EthnicityModel::FourClass, Ethnicity::EastAsian | Ethnicity::SoutheastAsian) => Ethnicity::Asian,
        (EthnicityModel::FourClass, _) => Ethnicity::White,
        (EthnicityModel::SevenClass, Ethnicity::Asian) => Ethnicity::EastAsian,
        (EthnicityModel::SevenClass, _) => Ethnicity::White,
    }
}

/// Scores with `concentration` on the planted category and the rest spread unevenly.
pub fn mock_scores(
    seed: u64,
    image_ref: &str,
    face_index: u32,
    category: Ethnicity,
    concentration: f64,
    model: EthnicityModel,
) -> EthnicityScores {
    let target = project_category(category, model);
    let cats = model.categories();
    let mut rng = rng_for(seed, &["scores", image_ref, &face_index.to_string()]);
    let weights: Vec<f64> = cats.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let others: f64 = cats.iter().zip(&weights).filter(|(c, _)| **c != target).map(|(_, w)| w).sum();
    let c = concentration.clamp(0.0, 1.0);
    let mut scores: Vec<f64> = cats
        .iter()
        .zip(&weights)
        .map(|(cat, w)| if *cat == target { c } else { (1.0 - c) * w / others })
        .collect();
    let sum: f64 = scores.iter().sum();
    scores.iter_mut().for_each(|s| *s /= sum);
    EthnicityScores::new(model, scores).expect("mock scores lie on the simplex")
}

pub struct MockBackend {
    seed: u64,
    plan: IdentityPlan,
    crashes: Mutex<HashMap<String, u32>>,
}

impl MockBackend {
    pub fn new(seed: u64, plan: IdentityPlan) -> Self {
        MockBackend {
            seed,
            plan,
            crashes: Mutex::new(HashMap::new()),
        }
    }

    /// Make the first `times` shards containing `image_ref` fail.
    pub fn crash_on(self, image_ref: &str, times: u32) -> Self {
        self.crashes.lock().unwrap().insert(image_ref.to_string(), times);
        self
    }

    pub fn plan(&self) -> &IdentityPlan {
        &self.plan
    }

    /// Build the bundle for `entries` in memory.
    pub fn infer(&self, entries: &[ManifestEntry], request: &InferenceRequest) -> Result<Bundle, BackendError> {
        let mut bundle = Bundle::empty(&self.name(), request);
        bundle.meta.checkpoint = Some(MOCK_CHECKPOINT.into());
        let empty = ImagePlan::default();
        for entry in entries {
            let plan = self.plan.get(&entry.image_ref).unwrap_or(&empty);
            let (width, height) = match plan.size {
                Some(s) => s,
                None => image::image_dimensions(&entry.path)
                    .map_err(|e| BackendError::Failed(format!("{}: {e}", entry.path.display())))?,
            };
            let mut faces = Vec::with_capacity(plan.faces.len());
            for (i, face) in plan.faces.iter().enumerate() {
                let face_index = i as u32;
                faces.push(FaceDetection {
                    face_index,
                    bbox: face.bbox,
                    confidence: face.confidence,
                });
                if request.tasks.embed {
                    bundle.embeddings.push((
                        EmbeddingKey {
                            ordinal: 0,
                            image_ref: entry.image_ref.clone(),
                            face_index,
                        },
                        mock_embedding(self.seed, &face.identity, &entry.image_ref, face_index),
                    ));
                }
                if request.tasks.ethnicity {
                    bundle.scores.push(FaceScores {
                        image_ref: entry.image_ref.clone(),
                        face_index,
                        scores: mock_scores(
                            self.seed,
                            &entry.image_ref,
                            face_index,
                            face.category,
                            face.concentration,
                            request.ethnicity_model,
                        ),
                    });
                }
            }
            bundle.detections.push(ImageDetections {
                image_ref: entry.image_ref.clone(),
                width,
                height,
                faces,
            });
        }
        Ok(bundle)
    }
}

impl InferenceBackend for MockBackend {
    fn name(&self) -> String {
        format!("mock:{}", self.seed)
    }

    fn run_shard(&self, manifest: &Path, request: &InferenceRequest, out: &Path) -> Result<(), BackendError> {
        let entries: Vec<ManifestEntry> = read_jsonl(manifest).map_err(|e| BackendError::Failed(e.to_string()))?;
        {
            let mut crashes = self.crashes.lock().unwrap();
            for e in &entries {
                if let Some(left) = crashes.get_mut(&e.image_ref) {
                    if *left > 0 {
                        *left -= 1;
                        return Err(BackendError::Failed(format!("planted crash on {}", e.image_ref)));
                    }
                }
            }
        }
        let mut bundle = self.infer(&entries, request)?;
        bundle.write(out).map_err(|e| BackendError::Failed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_identity_close_different_far() {
        let a = mock_embedding(7, "nm1", "p1", 0);
        let b = mock_embedding(7, "nm1", "p2", 3);
        let c = mock_embedding(7, "nm2", "p1", 1);
        assert!(a.distance(&b) < 0.3, "{}", a.distance(&b));
        assert!(a.distance(&c) > 1.0, "{}", a.distance(&c));
        assert!((a.as_slice().iter().map(|x| x * x).sum::<f32>() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn margins_hold_over_many_identities() {
        let ids: Vec<String> = (0..40).map(|i| format!("id{i}")).collect();
        let embs: Vec<_> = ids.iter().map(|id| mock_embedding(1, id, "x", 0)).collect();
        for i in 0..ids.len() {
            let twin = mock_embedding(1, &ids[i], "y", 2);
            assert!(embs[i].distance(&twin) < 0.3);
            for j in (i + 1)..ids.len() {
                assert!(embs[i].distance(&embs[j]) > 1.0);
            }
        }
    }

    #[test]
    fn planted_category_wins() {
        for model in [EthnicityModel::FourClass, EthnicityModel::SevenClass] {
            let s = mock_scores(3, "p", 0, Ethnicity::Black, 0.9, model);
            let best = model
                .categories()
                .iter()
                .zip(s.values())
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(*best, Ethnicity::Black);
            assert!((s.get(Ethnicity::Black).unwrap() - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn infer_is_deterministic() {
        let mut plan = IdentityPlan::new();
        plan.insert(
            "p1".into(),
            ImagePlan {
                size: Some((100, 100)),
                faces: vec![PlantedFace {
                    identity: "nm1".into(),
                    bbox: BBox::new(1.0, 1.0, 10.0, 10.0),
                    category: Ethnicity::White,
                    concentration: 0.8,
                    confidence: 0.99,
                }],
            },
        );
        plan.insert("p2".into(), ImagePlan { size: Some((10, 10)), faces: vec![] });
        let entries: Vec<_> = ["p1", "p2"]
            .iter()
            .map(|r| ManifestEntry {
                image_ref: r.to_string(),
                path: "unused".into(),
            })
            .collect();
        let backend = MockBackend::new(5, plan);
        let a = backend.infer(&entries, &InferenceRequest::default()).unwrap();
        let b = backend.infer(&entries, &InferenceRequest::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.detections[1].faces.is_empty());
        a.validate().unwrap();
    }
}
