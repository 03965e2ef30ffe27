use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gateway::FaceEmbedding;

pub const DEFAULT_TOP_K: u32 = 10;

/// Which cast members a poster face is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum IndexScope {
    #[default]
    WholeCast,
    TopK(u32),
}

impl IndexScope {
    pub fn admits(&self, rank: u32) -> bool {
        match self {
            IndexScope::WholeCast => true,
            IndexScope::TopK(k) => rank <= *k,
        }
    }
}

impl fmt::Display for IndexScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexScope::WholeCast => f.write_str("whole"),
            IndexScope::TopK(k) => write!(f, "top:{k}"),
        }
    }
}

impl FromStr for IndexScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "whole" {
            return Ok(IndexScope::WholeCast);
        }
        s.strip_prefix("top:")
            .and_then(|k| k.parse::<u32>().ok())
            .filter(|k| *k > 0)
            .map(IndexScope::TopK)
            .ok_or_else(|| format!("bad scope `{s}` (expected whole or top:<k>)"))
    }
}

impl From<IndexScope> for String {
    fn from(s: IndexScope) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for IndexScope {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One cast member with the embeddings of their usable profile pictures.
#[derive(Debug, Clone)]
pub struct CastEmbeddings {
    pub actor_id: String,
    pub rank: u32,
    /// `(image ordinal, embedding)` pairs.
    pub embeddings: Vec<(u32, FaceEmbedding)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub actor_id: String,
    pub image_ordinal: u32,
    pub embedding: FaceEmbedding,
}

/// Read-only per-movie actor index, entries ordered by (actor_id, image ordinal).
#[derive(Debug, Clone)]
pub struct ActorIndex {
    entries: Vec<IndexEntry>,
    scope: IndexScope,
    omitted: Vec<String>,
}

impl ActorIndex {
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn scope(&self) -> IndexScope {
        self.scope
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// In-scope actors left out because they had no embeddings.
    pub fn omitted(&self) -> &[String] {
        &self.omitted
    }

    pub fn actor_count(&self) -> usize {
        let mut ids: Vec<&str> = self.entries.iter().map(|e| e.actor_id.as_str()).collect();
        ids.dedup();
        ids.len()
    }

    /// Closest entry; ties go to the smallest (actor_id, image ordinal).
    pub fn nearest(&self, face: &FaceEmbedding) -> Option<(&IndexEntry, f64)> {
        let mut best: Option<(&IndexEntry, f64)> = None;
        for e in &self.entries {
            let d = face.distance(&e.embedding);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e, d));
            }
        }
        best
    }
}

pub fn build_index(cast: &[CastEmbeddings], scope: IndexScope) -> ActorIndex {
    let mut entries = Vec::new();
    let mut omitted = Vec::new();
    for member in cast.iter().filter(|m| scope.admits(m.rank)) {
        if member.embeddings.is_empty() {
            omitted.push(member.actor_id.clone());
        }
        entries.extend(member.embeddings.iter().map(|(ordinal, e)| IndexEntry {
            actor_id: member.actor_id.clone(),
            image_ordinal: *ordinal,
            embedding: e.clone(),
        }));
    }
    entries.sort_by(|a, b| (&a.actor_id, a.image_ordinal).cmp(&(&b.actor_id, b.image_ordinal)));
    omitted.sort();
    ActorIndex { entries, scope, omitted }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(hot: usize) -> FaceEmbedding {
        let mut v = vec![0.0; 8];
        v[hot % 8] = 1.0;
        FaceEmbedding::new(v).unwrap()
    }

    fn cast(n: u32, without_images: &[u32]) -> Vec<CastEmbeddings> {
        (1..=n)
            .map(|rank| CastEmbeddings {
                actor_id: format!("nm{rank:03}"),
                rank,
                embeddings: if without_images.contains(&rank) {
                    vec![]
                } else {
                    vec![(0, emb(rank as usize))]
                },
            })
            .collect()
    }

    #[test]
    fn top_k_limits_actors() {
        let c = cast(25, &[]);
        assert_eq!(build_index(&c, IndexScope::TopK(10)).actor_count(), 10);
        assert_eq!(build_index(&c, IndexScope::WholeCast).actor_count(), 25);
    }

    #[test]
    fn actors_without_images_are_omitted_and_reported() {
        let c = cast(12, &[3, 7]);
        let idx = build_index(&c, IndexScope::WholeCast);
        assert_eq!(idx.actor_count(), 10);
        assert_eq!(idx.omitted(), &["nm003".to_string(), "nm007".to_string()]);
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("whole".parse::<IndexScope>().unwrap(), IndexScope::WholeCast);
        assert_eq!("top:10".parse::<IndexScope>().unwrap(), IndexScope::TopK(10));
        assert!("top:0".parse::<IndexScope>().is_err());
        assert!("top".parse::<IndexScope>().is_err());
        assert_eq!(IndexScope::TopK(3).to_string(), "top:3");
    }
}
