//! On-disk inference bundle.
//!
//! ```text
//! <dir>/bundle.json             metadata
//! <dir>/detections.jsonl        one ImageDetections per manifest image
//! <dir>/embeddings.bin          "EMB1", u32 count, u32 dim, count*dim f32 (all little-endian)
//! <dir>/embeddings.index.jsonl  ordinal -> (image_ref, face_index)
//! <dir>/ethnicity.jsonl         one FaceScores per face
//! ```

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::*;
use crate::error::{Error, Result};
use crate::ethnicity::EthnicityModel;
use crate::io::{read_json, read_jsonl, to_jsonl, write_atomic, write_json};

pub const META_FILE: &str = "bundle.json";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const EMBEDDING_INDEX_FILE: &str = "embeddings.index.jsonl";
pub const ETHNICITY_FILE: &str = "ethnicity.jsonl";

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: String,
    pub backend: String,
    pub tasks: TaskSet,
    pub ethnicity_model: EthnicityModel,
    pub images: usize,
    pub faces: usize,
    pub embedding_dim: usize,
    /// Model checkpoint digest, when the backend reports one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub meta: BundleMeta,
    pub detections: Vec<ImageDetections>,
    pub embeddings: Vec<(EmbeddingKey, FaceEmbedding)>,
    pub scores: Vec<FaceScores>,
}

/// Encode embeddings in the EMB1 layout.
pub fn encode_embeddings(vectors: &[&FaceEmbedding], dim: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + vectors.len() * dim * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for v in vectors {
        for x in v.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Decode an EMB1 buffer into raw rows, checking the declared length exactly.
pub fn decode_embeddings(bytes: &[u8], file: &str) -> Result<(usize, Vec<Vec<f32>>), ProtocolError> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(ProtocolError::BadMagic { file: file.into() });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + count as u64 * dim as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(ProtocolError::Length {
            file: file.into(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let rows = bytes[12..]
        .chunks_exact(dim.max(1) * 4)
        .take(count)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect::<Vec<Vec<f32>>>();
    Ok((dim, if dim == 0 { vec![Vec::new(); count] } else { rows }))
}

impl Bundle {
    pub fn empty(backend: &str, request: &InferenceRequest) -> Self {
        Bundle {
            meta: BundleMeta {
                format_version: crate::FORMAT_VERSION.into(),
                backend: backend.into(),
                tasks: request.tasks,
                ethnicity_model: request.ethnicity_model,
                images: 0,
                faces: 0,
                embedding_dim: EMBEDDING_DIM,
                checkpoint: None,
            },
            detections: Vec::new(),
            embeddings: Vec::new(),
            scores: Vec::new(),
        }
    }

    fn refresh_counts(&mut self) {
        self.meta.images = self.detections.len();
        self.meta.faces = self.detections.iter().map(|d| d.faces.len()).sum();
        for (i, (key, _)) in self.embeddings.iter_mut().enumerate() {
            key.ordinal = i;
        }
    }

    /// Write every bundle file into `dir`, each atomically.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.refresh_counts();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vectors: Vec<&FaceEmbedding> = self.embeddings.iter().map(|(_, e)| e).collect();
        write_atomic(&dir.join(EMBEDDINGS_FILE), &encode_embeddings(&vectors, self.meta.embedding_dim))?;
        write_atomic(
            &dir.join(EMBEDDING_INDEX_FILE),
            &to_jsonl(self.embeddings.iter().map(|(k, _)| k))?,
        )?;
        write_atomic(&dir.join(DETECTIONS_FILE), &to_jsonl(&self.detections)?)?;
        write_atomic(&dir.join(ETHNICITY_FILE), &to_jsonl(&self.scores)?)?;
        write_json(&dir.join(META_FILE), &self.meta)
    }

    /// Write into a sibling temp directory, then move it into place.
    pub fn write_dir_atomic(&mut self, dir: &Path) -> Result<()> {
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let tmp = tempfile::Builder::new()
            .prefix(".bundle-")
            .tempdir_in(parent)
            .map_err(|e| Error::io(parent, e))?;
        self.write(tmp.path())?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = tmp.keep();
        fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
        Ok(())
    }

    /// Read and fully validate a bundle directory.
    pub fn read(dir: &Path) -> Result<Self> {
        let meta: BundleMeta = read_json(&dir.join(META_FILE))?;
        let detections: Vec<ImageDetections> = read_jsonl(&dir.join(DETECTIONS_FILE))?;
        let scores: Vec<FaceScores> = read_jsonl(&dir.join(ETHNICITY_FILE))?;
        let index: Vec<EmbeddingKey> = read_jsonl(&dir.join(EMBEDDING_INDEX_FILE))?;
        let emb_path = dir.join(EMBEDDINGS_FILE);
        let bytes = fs::read(&emb_path).map_err(|e| Error::io(&emb_path, e))?;
        let (dim, rows) = decode_embeddings(&bytes, EMBEDDINGS_FILE)?;
        if !rows.is_empty() && dim != meta.embedding_dim {
            return Err(ProtocolError::Dimension {
                expected: meta.embedding_dim,
                found: dim,
            }
            .into());
        }
        if index.len() != rows.len() {
            return Err(ProtocolError::IndexCount {
                index: index.len(),
                count: rows.len(),
            }
            .into());
        }
        let mut embeddings = Vec::with_capacity(rows.len());
        for (i, (key, row)) in index.into_iter().zip(rows).enumerate() {
            if key.ordinal != i {
                return Err(ProtocolError::Other(format!("index line {i} carries ordinal {}", key.ordinal)).into());
            }
            let emb = FaceEmbedding::new(row).map_err(|e| match e {
                ProtocolError::NotNormalized { norm, .. } => ProtocolError::NotNormalized { ordinal: i, norm },
                other => other,
            })?;
            embeddings.push((key, emb));
        }
        let bundle = Bundle {
            meta,
            detections,
            embeddings,
            scores,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Check every protocol invariant that is not enforced by parsing alone.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let mut faces: HashMap<(&str, u32), ()> = HashMap::new();
        let mut images = HashSet::new();
        for d in &self.detections {
            if !images.insert(d.image_ref.as_str()) {
                return Err(ProtocolError::Other(format!("duplicate detections for {}", d.image_ref)));
            }
            for f in &d.faces {
                if !f.bbox.is_within(d.width, d.height) {
                    return Err(ProtocolError::BBox {
                        image_ref: d.image_ref.clone(),
                        face_index: f.face_index,
                        bbox: f.bbox.to_string(),
                        width: d.width,
                        height: d.height,
                    });
                }
                if !(0.0..=1.0).contains(&f.confidence) {
                    return Err(ProtocolError::Confidence {
                        image_ref: d.image_ref.clone(),
                        face_index: f.face_index,
                        confidence: f.confidence,
                    });
                }
                if faces.insert((d.image_ref.as_str(), f.face_index), ()).is_some() {
                    return Err(ProtocolError::Face {
                        image_ref: d.image_ref.clone(),
                        face_index: f.face_index,
                        reason: "duplicate face index".into(),
                    });
                }
            }
        }
        let face_count = faces.len();
        let check_key = |image_ref: &str, face_index: u32, seen: &mut HashSet<(String, u32)>, what: &str| {
            if !faces.contains_key(&(image_ref, face_index)) {
                return Err(ProtocolError::Face {
                    image_ref: image_ref.into(),
                    face_index,
                    reason: format!("{what} for an undetected face"),
                });
            }
            if !seen.insert((image_ref.to_string(), face_index)) {
                return Err(ProtocolError::Face {
                    image_ref: image_ref.into(),
                    face_index,
                    reason: format!("duplicate {what}"),
                });
            }
            Ok(())
        };
        let mut seen = HashSet::new();
        for (key, emb) in &self.embeddings {
            check_key(&key.image_ref, key.face_index, &mut seen, "embedding")?;
            if emb.dim() != self.meta.embedding_dim {
                return Err(ProtocolError::Dimension {
                    expected: self.meta.embedding_dim,
                    found: emb.dim(),
                });
            }
        }
        if self.meta.tasks.embed && seen.len() != face_count {
            return Err(ProtocolError::Other(format!(
                "{} embeddings for {face_count} faces",
                seen.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.scores {
            check_key(&s.image_ref, s.face_index, &mut seen, "scores")?;
            if s.scores.model() != self.meta.ethnicity_model {
                return Err(ProtocolError::Scores {
                    image_ref: s.image_ref.clone(),
                    face_index: s.face_index,
                    reason: "model differs from bundle metadata".into(),
                });
            }
        }
        if self.meta.tasks.ethnicity && seen.len() != face_count {
            return Err(ProtocolError::Other(format!("{} score vectors for {face_count} faces", seen.len())));
        }
        Ok(())
    }

    pub fn detections_for(&self, image_ref: &str) -> Option<&ImageDetections> {
        self.detections.iter().find(|d| d.image_ref == image_ref)
    }

    /// Embeddings keyed by (image_ref, face_index).
    pub fn embedding_map(&self) -> HashMap<(&str, u32), &FaceEmbedding> {
        self.embeddings
            .iter()
            .map(|(k, e)| ((k.image_ref.as_str(), k.face_index), e))
            .collect()
    }

    pub fn score_map(&self) -> HashMap<(&str, u32), &EthnicityScores> {
        self.scores
            .iter()
            .map(|s| ((s.image_ref.as_str(), s.face_index), &s.scores))
            .collect()
    }

    /// Append another bundle produced with the same request.
    pub fn extend(&mut self, other: Bundle) {
        self.detections.extend(other.detections);
        self.embeddings.extend(other.embeddings);
        self.scores.extend(other.scores);
        if self.meta.checkpoint.is_none() {
            self.meta.checkpoint = other.meta.checkpoint;
        }
        self.refresh_counts();
    }
}
