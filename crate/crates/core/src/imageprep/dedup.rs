use serde::{Deserialize, Serialize};

use super::dhash::{hamming, DHash};
use crate::error::{Error, Result};
use crate::ingestion::PosterRef;

pub const DEFAULT_DEDUP_THRESHOLD: u32 = 16;

/// A poster record with its hash, as written to `posters.hashed.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedPoster {
    #[serde(flatten)]
    pub poster: PosterRef,
    pub dhash: DHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupCluster {
    pub movie_id: String,
    pub members: Vec<String>,
    pub representative: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupOutcome {
    pub kept: Vec<PosterRef>,
    pub clusters: Vec<DedupCluster>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clustering of one movie's posters on `distance < threshold`.
///
/// Members are listed in keep order (IMDb main poster first, then poster id) and
/// the first member of each cluster is its representative.
pub fn dedup_posters(posters: &[HashedPoster], threshold: u32) -> Result<DedupOutcome> {
    let Some(first) = posters.first() else {
        return Ok(DedupOutcome::default());
    };
    let movie_id = &first.poster.movie_id;
    if let Some(other) = posters.iter().find(|p| &p.poster.movie_id != movie_id) {
        return Err(Error::Invalid(format!(
            "dedup input mixes movies {movie_id} and {}",
            other.poster.movie_id
        )));
    }

    let mut ordered: Vec<&HashedPoster> = posters.iter().collect();
    ordered.sort_by(|a, b| {
        (a.poster.source, &a.poster.poster_id).cmp(&(b.poster.source, &b.poster.poster_id))
    });

    let n = ordered.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if hamming(ordered[i].dhash, ordered[j].dhash) < threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    // Keep the smaller index as root so roots are first members.
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut clusters: Vec<(usize, DedupCluster)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let id = ordered[i].poster.poster_id.clone();
        match clusters.iter_mut().find(|(r, _)| *r == root) {
            Some((_, c)) => c.members.push(id),
            None => clusters.push((
                root,
                DedupCluster {
                    movie_id: movie_id.clone(),
                    members: vec![id.clone()],
                    representative: id,
                },
            )),
        }
    }

    let kept = clusters
        .iter()
        .map(|(root, _)| ordered[*root].poster.clone())
        .collect();
    Ok(DedupOutcome {
        kept,
        clusters: clusters.into_iter().map(|(_, c)| c).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::PosterSource;
    use proptest::prelude::*;

    fn poster(id: &str, source: PosterSource, bits: u64) -> HashedPoster {
        HashedPoster {
            poster: PosterRef {
                poster_id: id.into(),
                movie_id: "tt1".into(),
                source,
                image_path: format!("{id}.png").into(),
                width: 10,
                height: 10,
            },
            dhash: DHash(bits),
        }
    }

    #[test]
    fn empty_input() {
        assert_eq!(dedup_posters(&[], 16).unwrap(), DedupOutcome::default());
    }

    #[test]
    fn singleton_is_its_own_representative() {
        let out = dedup_posters(&[poster("a", PosterSource::Tmdb, 7)], 16).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.clusters[0].representative, "a");
    }

    #[test]
    fn pairwise_zero_three_three_is_one_cluster() {
        // a=b (0), a,c differ by 3, b,c differ by 3
        let ps = [
            poster("a", PosterSource::Tmdb, 0),
            poster("b", PosterSource::Tmdb, 0),
            poster("c", PosterSource::Tmdb, 0b111),
        ];
        let out = dedup_posters(&ps, 16).unwrap();
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn boundary_distance_is_not_a_duplicate() {
        let ps = [
            poster("a", PosterSource::Tmdb, 0),
            poster("b", PosterSource::Tmdb, 0xffff),
        ];
        assert_eq!(dedup_posters(&ps, 16).unwrap().clusters.len(), 2);
        assert_eq!(dedup_posters(&ps, 17).unwrap().clusters.len(), 1);
    }

    #[test]
    fn single_linkage_chains() {
        // a-b = 10, b-c = 10, a-c = 20
        let ps = [
            poster("a", PosterSource::Tmdb, 0),
            poster("b", PosterSource::Tmdb, (1 << 10) - 1),
            poster("c", PosterSource::Tmdb, (1 << 20) - 1),
        ];
        let out = dedup_posters(&ps, 16).unwrap();
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].members, vec!["a", "b", "c"]);
    }

    #[test]
    fn imdb_main_poster_wins() {
        let ps = [
            poster("a", PosterSource::Tmdb, 0),
            poster("z", PosterSource::ImdbMain, 1),
        ];
        let out = dedup_posters(&ps, 16).unwrap();
        assert_eq!(out.clusters[0].representative, "z");
        assert_eq!(out.kept[0].source, PosterSource::ImdbMain);
    }

    #[test]
    fn threshold_extremes() {
        let ps = [
            poster("a", PosterSource::Tmdb, 0),
            poster("b", PosterSource::Tmdb, 0),
            poster("c", PosterSource::Tmdb, u64::MAX),
        ];
        // strict `<`: nothing is closer than 0
        assert_eq!(dedup_posters(&ps, 0).unwrap().clusters.len(), 3);
        assert_eq!(dedup_posters(&ps, 1).unwrap().clusters.len(), 2);
        assert_eq!(dedup_posters(&ps, 65).unwrap().clusters.len(), 1);
    }

    #[test]
    fn mixed_movies_rejected() {
        let mut b = poster("b", PosterSource::Tmdb, 0);
        b.poster.movie_id = "tt2".into();
        assert!(dedup_posters(&[poster("a", PosterSource::Tmdb, 0), b], 16).is_err());
    }

    fn arb_posters() -> impl Strategy<Value = Vec<HashedPoster>> {
        prop::collection::vec((any::<bool>(), 0u64..64, any::<u64>()), 1..12).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (imdb, base, noise))| {
                    let src = if imdb { PosterSource::ImdbMain } else { PosterSource::Tmdb };
                    // a handful of base hashes with sparse noise so clusters form
                    let bits = (base % 4).wrapping_mul(0x0f0f_0f0f_0f0f_0f0f) ^ (noise & noise >> 7 & noise >> 13);
                    poster(&format!("p{i:02}"), src, bits)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn permutation_stable(ps in arb_posters(), seed in any::<u64>(), threshold in 0u32..65) {
            let base = dedup_posters(&ps, threshold).unwrap();
            let mut shuffled = ps.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(base, dedup_posters(&shuffled, threshold).unwrap());
        }

        #[test]
        fn cluster_invariants(ps in arb_posters(), threshold in 0u32..65) {
            let out = dedup_posters(&ps, threshold).unwrap();
            prop_assert_eq!(out.kept.len(), out.clusters.len());
            let total: usize = out.clusters.iter().map(|c| c.members.len()).sum();
            prop_assert_eq!(total, ps.len());
            for c in &out.clusters {
                prop_assert!(c.members.contains(&c.representative));
                if c.members.len() > 1 {
                    for m in &c.members {
                        let h = ps.iter().find(|p| &p.poster.poster_id == m).unwrap().dhash;
                        let linked = c.members.iter().filter(|o| *o != m).any(|o| {
                            let oh = ps.iter().find(|p| &p.poster.poster_id == o).unwrap().dhash;
                            hamming(h, oh) < threshold
                        });
                        prop_assert!(linked);
                    }
                }
            }
        }

        #[test]
        fn removing_representative_keeps_remaining_partition(ps in arb_posters(), threshold in 0u32..65) {
            let out = dedup_posters(&ps, threshold).unwrap();
            let rep = out.clusters[0].representative.clone();
            let rest: Vec<_> = ps.iter().filter(|p| p.poster.poster_id != rep).cloned().collect();
            let again = dedup_posters(&rest, threshold).unwrap();
            // Every other cluster survives intact.
            for c in out.clusters.iter().skip(1) {
                prop_assert!(again.clusters.iter().any(|a| a.members == c.members));
            }
        }
    }
}
