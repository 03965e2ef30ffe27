//! Reader for the open movie dump (`title.basics`, `title.ratings`, and the
//! optional `title.principals` / `name.basics` tables), gzip accepted.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use super::types::{CastMember, MovieRecord};
use crate::error::{Error, Result};

const NULL: &str = "\\N";
pub const ANIMATION_GENRE: &str = "Animation";
const CAST_CATEGORIES: [&str; 2] = ["actor", "actress"];

/// A dump line that could not become a [`MovieRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub file: String,
    pub line: usize,
    pub movie_id: Option<String>,
    pub reason: String,
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Locate `stem.tsv` or `stem.tsv.gz` in `dir`.
fn find_table(dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}.tsv"), format!("{stem}.tsv.gz")]
        .into_iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
}

fn header_index(header: &str, path: &Path, cols: &[&str]) -> Result<Vec<usize>> {
    let names: Vec<&str> = header.trim_end_matches(['\r', '\n']).split('\t').collect();
    cols.iter()
        .map(|c| {
            names.iter().position(|n| n == c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing column `{c}`"),
            })
        })
        .collect()
}

/// Iterate `(line_number, fields)` of a TSV table after checking its header.
fn for_each_row(
    path: &Path,
    cols: &[&str],
    mut f: impl FnMut(usize, Option<Vec<&str>>, &str),
) -> Result<()> {
    let mut reader = open_maybe_gz(path)?;
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let idx = header_index(&header, path, cols)?;
    let width = header.split('\t').count();
    let mut line = String::new();
    let mut n = 1;
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            break;
        }
        n += 1;
        let raw = line.trim_end_matches(['\r', '\n']);
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != width {
            f(n, None, raw);
        } else {
            f(n, Some(idx.iter().map(|i| fields[*i]).collect()), raw);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Rating {
    avg: f64,
    votes: u64,
}

/// The parsed dump: movie records (or rejects) in file order plus actor names.
#[derive(Debug, Default)]
pub struct MovieDump {
    pub records: Vec<Result<MovieRecord, Reject>>,
    pub actor_names: HashMap<String, String>,
}

/// `path` is either the directory holding the tables or the `title.basics` file itself.
pub fn read_movie_dump(path: &Path, max_year: i32) -> Result<MovieDump> {
    let (dir, basics) = if path.is_dir() {
        let basics = find_table(path, "title.basics").ok_or_else(|| {
            Error::Invalid(format!("{} has no title.basics.tsv[.gz]", path.display()))
        })?;
        (path.to_path_buf(), basics)
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (dir, path.to_path_buf())
    };

    let mut ratings = HashMap::new();
    if let Some(p) = find_table(&dir, "title.ratings") {
        for_each_row(&p, &["tconst", "averageRating", "numVotes"], |_, row, _| {
            if let Some(row) = row {
                if let (Ok(avg), Ok(votes)) = (row[1].parse::<f64>(), row[2].parse::<u64>()) {
                    ratings.insert(row[0].to_string(), Rating { avg, votes });
                }
            }
        })?;
    }

    let mut casts: HashMap<String, Vec<(u32, String)>> = HashMap::new();
    if let Some(p) = find_table(&dir, "title.principals") {
        for_each_row(&p, &["tconst", "ordering", "nconst", "category"], |_, row, _| {
            if let Some(row) = row {
                if CAST_CATEGORIES.contains(&row[3]) {
                    if let Ok(ord) = row[1].parse::<u32>() {
                        casts
                            .entry(row[0].to_string())
                            .or_default()
                            .push((ord, row[2].to_string()));
                    }
                }
            }
        })?;
    }

    let mut actor_names = HashMap::new();
    if let Some(p) = find_table(&dir, "name.basics") {
        for_each_row(&p, &["nconst", "primaryName"], |_, row, _| {
            if let Some(row) = row {
                actor_names.insert(row[0].to_string(), row[1].to_string());
            }
        })?;
    }

    let file = basics
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut records = Vec::new();
    for_each_row(
        &basics,
        &["tconst", "titleType", "primaryTitle", "startYear", "genres"],
        |line, row, raw| {
            let reject = |movie_id: Option<&str>, reason: String| Reject {
                file: file.clone(),
                line,
                movie_id: movie_id.map(str::to_string),
                reason,
            };
            let Some(row) = row else {
                let id = raw.split('\t').next().filter(|s| !s.is_empty());
                records.push(Err(reject(id, "wrong number of columns".into())));
                return;
            };
            if row[1] != "movie" {
                return;
            }
            let id = row[0];
            let year = match row[3].parse::<i32>() {
                Ok(y) => y,
                Err(_) => {
                    records.push(Err(reject(Some(id), format!("bad startYear `{}`", row[3]))));
                    return;
                }
            };
            let genres: BTreeSet<String> = if row[4] == NULL {
                BTreeSet::new()
            } else {
                row[4].split(',').map(str::to_string).collect()
            };
            let rating = ratings.get(id).copied().unwrap_or(Rating { avg: 0.0, votes: 0 });
            let mut cast = casts.remove(id).unwrap_or_default();
            cast.sort();
            cast.dedup_by(|a, b| a.1 == b.1);
            let record = MovieRecord {
                movie_id: id.to_string(),
                title: row[2].to_string(),
                year,
                is_animated: genres.contains(ANIMATION_GENRE),
                genres,
                num_votes: rating.votes,
                avg_rating: rating.avg,
                original_language: None,
                cast: cast
                    .into_iter()
                    .enumerate()
                    .map(|(i, (_, actor_id))| CastMember {
                        actor_id,
                        rank: i as u32 + 1,
                    })
                    .collect(),
            };
            match record.validate(max_year) {
                Ok(()) => records.push(Ok(record)),
                Err(e) => records.push(Err(reject(Some(id), e.to_string()))),
            }
        },
    )?;

    Ok(MovieDump {
        records,
        actor_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use std::io::Write;

    const BASICS: &str = "tconst\ttitleType\tprimaryTitle\toriginalTitle\tisAdult\tstartYear\tendYear\truntimeMinutes\tgenres
tt01\tmovie\tAlpha\tAlpha\t0\t1994\t\\N\t100\tDrama,Crime
tt02\ttvSeries\tShow\tShow\t0\t2001\t\\N\t30\tComedy
tt03\tmovie\tCartoon\tCartoon\t0\t2010\t\\N\t80\tAnimation,Family
tt04\tmovie\tNoYear\tNoYear\t0\t\\N\t\\N\t90\tDrama
tt05\tbroken line
tt06\tmovie\tBeta\tBeta\t0\t2020\t\\N\t95\t\\N
";
    const RATINGS: &str = "tconst\taverageRating\tnumVotes
tt01\t7.5\t12000
tt03\t6.1\t3000
";
    const PRINCIPALS: &str = "tconst\tordering\tnconst\tcategory\tjob\tcharacters
tt01\t3\tnm3\tactress\t\\N\t\\N
tt01\t1\tnm1\tactor\t\\N\t\\N
tt01\t2\tnm9\tdirector\t\\N\t\\N
tt01\t5\tnm5\tactor\t\\N\t\\N
";

    #[test]
    fn parses_joins_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("title.basics.tsv"), BASICS).unwrap();
        let mut gz = GzEncoder::new(
            File::create(dir.path().join("title.ratings.tsv.gz")).unwrap(),
            flate2::Compression::default(),
        );
        gz.write_all(RATINGS.as_bytes()).unwrap();
        gz.finish().unwrap();
        std::fs::write(dir.path().join("title.principals.tsv"), PRINCIPALS).unwrap();

        let dump = read_movie_dump(dir.path(), 2028).unwrap();
        let ok: Vec<_> = dump.records.iter().filter_map(|r| r.as_ref().ok()).collect();
        let bad: Vec<_> = dump.records.iter().filter_map(|r| r.as_ref().err()).collect();
        assert_eq!(ok.len(), 3);
        assert_eq!(bad.len(), 2);
        assert_eq!(bad[0].movie_id.as_deref(), Some("tt04"));
        assert_eq!(bad[1].line, 6);

        let alpha = ok[0];
        assert_eq!(alpha.num_votes, 12000);
        assert_eq!(alpha.year, 1994);
        let cast: Vec<_> = alpha.cast.iter().map(|c| (c.actor_id.as_str(), c.rank)).collect();
        assert_eq!(cast, vec![("nm1", 1), ("nm3", 2), ("nm5", 3)]);
        assert!(ok[1].is_animated);
        assert_eq!(ok[2].num_votes, 0);
        assert!(ok[2].genres.is_empty());
    }
}
