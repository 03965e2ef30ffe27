use super::dump::Reject;
use super::types::MovieRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MovieFilter {
    pub min_votes: u64,
    pub exclude_animated: bool,
}

impl Default for MovieFilter {
    fn default() -> Self {
        MovieFilter {
            min_votes: 1000,
            exclude_animated: true,
        }
    }
}

impl MovieFilter {
    pub fn accepts(&self, movie: &MovieRecord) -> bool {
        movie.num_votes >= self.min_votes && !(self.exclude_animated && movie.is_animated)
    }
}

/// Order-preserving filter over a movie stream.
pub fn filter_movies<'a, I>(movies: I, filter: &'a MovieFilter) -> impl Iterator<Item = MovieRecord> + 'a
where
    I: IntoIterator<Item = MovieRecord>,
    I::IntoIter: 'a,
{
    movies.into_iter().filter(move |m| filter.accepts(m))
}

/// Filter a parsed stream, diverting malformed records into `rejects`.
pub fn filter_records<I>(records: I, filter: &MovieFilter, rejects: &mut Vec<Reject>) -> Vec<MovieRecord>
where
    I: IntoIterator<Item = Result<MovieRecord, Reject>>,
{
    let mut out = Vec::new();
    for record in records {
        match record {
            Ok(m) if filter.accepts(&m) => out.push(m),
            Ok(_) => {}
            Err(r) => rejects.push(r),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn movie(id: &str, votes: u64, animated: bool) -> MovieRecord {
        let mut genres = BTreeSet::new();
        if animated {
            genres.insert("Animation".to_string());
        }
        MovieRecord {
            movie_id: id.into(),
            title: id.into(),
            year: 2000,
            genres,
            is_animated: animated,
            num_votes: votes,
            avg_rating: 5.0,
            original_language: None,
            cast: vec![],
        }
    }

    #[test]
    fn five_movie_fixture() {
        let fixture = vec![
            movie("a", 10, false),
            movie("b", 999, false),
            movie("c", 1000, false),
            movie("d", 5000, true),
            movie("e", 5000, false),
        ];
        let kept: Vec<_> = filter_movies(fixture.clone(), &MovieFilter::default())
            .map(|m| m.movie_id)
            .collect();
        assert_eq!(kept, vec!["c", "e"]);

        let all = MovieFilter {
            min_votes: 0,
            exclude_animated: false,
        };
        assert_eq!(filter_movies(fixture.clone(), &all).collect::<Vec<_>>(), fixture);
    }

    #[test]
    fn rejects_are_collected_not_fatal() {
        let reject = Reject {
            file: "title.basics.tsv".into(),
            line: 3,
            movie_id: None,
            reason: "bad".into(),
        };
        let records = vec![Ok(movie("a", 2000, false)), Err(reject.clone()), Ok(movie("b", 2000, false))];
        let mut rejects = Vec::new();
        let kept = filter_records(records, &MovieFilter::default(), &mut rejects);
        assert_eq!(kept.len(), 2);
        assert_eq!(rejects, vec![reject]);
    }

    proptest! {
        #[test]
        fn idempotent(specs in prop::collection::vec((0u64..3000, any::<bool>()), 0..40),
                      min_votes in 0u64..3000, exclude in any::<bool>()) {
            let movies: Vec<_> = specs.iter().enumerate()
                .map(|(i, (v, a))| movie(&format!("m{i}"), *v, *a)).collect();
            let f = MovieFilter { min_votes, exclude_animated: exclude };
            let once: Vec<_> = filter_movies(movies.clone(), &f).collect();
            let twice: Vec<_> = filter_movies(once.clone(), &f).collect();
            prop_assert_eq!(&once, &twice);
            for m in &once {
                prop_assert!(m.num_votes >= min_votes && !(exclude && m.is_animated));
            }
            let expected = movies.iter().filter(|m| m.num_votes >= min_votes && !(exclude && m.is_animated)).count();
            prop_assert_eq!(once.len(), expected);
        }
    }
}
