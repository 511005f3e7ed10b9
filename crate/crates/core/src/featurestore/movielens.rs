//! Reader for the `::`-delimited MovieLens-1M release.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::featurestore::schema::{build_vocabulary, Dataset, EncodedSample, FieldKind};
use crate::featurestore::transform::binarize_rating;

/// Field order of every MovieLens sample.
pub const MOVIELENS_FIELDS: [&str; 5] = ["UserID", "MovieID", "Gender", "Age", "Occupation"];

/// Published feature dimension of MovieLens-1M, kept for comparison only.
pub const MOVIELENS_REFERENCE_DIMENSION: usize = 10_072;

/// Result of [`load_movielens`].
#[derive(Debug)]
pub struct MovieLensData {
    pub dataset: Dataset,
    /// Lines of `ratings.dat` that could not be used.
    pub skipped: usize,
    pub movie_count: usize,
}

struct User {
    gender: String,
    age: String,
    occupation: String,
}

fn read_lossy(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // movies.dat is Latin-1; only ASCII ids are ever parsed
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn parse_users(text: &str) -> (HashMap<String, User>, usize) {
    let mut users = HashMap::new();
    let mut bad = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() < 4 || parts[..4].iter().any(|p| p.trim().is_empty()) {
            log::warn!("users.dat line {}: malformed, skipped", i + 1);
            bad += 1;
            continue;
        }
        users.insert(
            parts[0].trim().to_string(),
            User {
                gender: parts[1].trim().to_string(),
                age: parts[2].trim().to_string(),
                occupation: parts[3].trim().to_string(),
            },
        );
    }
    (users, bad)
}

/// Loads ratings joined with user attributes into five-field samples.
///
/// Malformed rating lines (wrong arity, unknown user, bad rating) are skipped
/// and counted.
pub fn load_movielens(ratings_path: &Path, users_path: &Path, movies_path: &Path) -> Result<MovieLensData> {
    let users_text = read_lossy(users_path)?;
    let movies_text = read_lossy(movies_path)?;
    let ratings_text = read_lossy(ratings_path)?;

    let (users, _) = parse_users(&users_text);
    let movie_count = movies_text
        .lines()
        .filter(|l| l.split("::").next().is_some_and(|id| !id.trim().is_empty()))
        .count();

    let mut rows: Vec<([&str; 5], u8)> = Vec::new();
    let mut skipped = 0usize;
    for (i, line) in ratings_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_rating(line, &users) {
            Ok(row) => rows.push(row),
            Err(reason) => {
                skipped += 1;
                log::warn!("ratings.dat line {}: {reason}; skipped", i + 1);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no usable ratings in {}",
            ratings_path.display()
        )));
    }

    let fields = MOVIELENS_FIELDS
        .iter()
        .enumerate()
        .map(|(k, name)| build_vocabulary(rows.iter().map(|(r, _)| r[k]), name, FieldKind::Categorical, 1))
        .collect::<Result<Vec<_>>>()?;
    let samples = rows
        .iter()
        .map(|(r, label)| {
            let ids = fields.iter().zip(r).map(|(f, t)| f.encode(Some(t))).collect();
            EncodedSample::new(ids, *label)
        })
        .collect();
    let dataset = Dataset { fields, samples };

    let known: usize = dataset.fields.iter().map(|f| f.tokens().len()).sum();
    if known != MOVIELENS_REFERENCE_DIMENSION {
        log::info!(
            "feature dimension {} ({} without unknown slots) differs from the published {}",
            dataset.feature_dimension(),
            known,
            MOVIELENS_REFERENCE_DIMENSION
        );
    }
    Ok(MovieLensData {
        dataset,
        skipped,
        movie_count,
    })
}

fn parse_rating<'a>(line: &'a str, users: &'a HashMap<String, User>) -> std::result::Result<([&'a str; 5], u8), String> {
    let parts: Vec<&str> = line.split("::").map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected 4 fields, found {}", parts.len()));
    }
    let rating: i64 = parts[2]
        .parse()
        .map_err(|_| format!("rating {:?} is not an integer", parts[2]))?;
    let label = binarize_rating(rating).map_err(|e| e.to_string())?;
    let user = users
        .get(parts[0])
        .ok_or_else(|| format!("user {} missing from users.dat", parts[0]))?;
    if parts[1].is_empty() {
        return Err("empty movie id".into());
    }
    Ok((
        [
            parts[0],
            parts[1],
            user.gender.as_str(),
            user.age.as_str(),
            user.occupation.as_str(),
        ],
        label,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_line_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(dir.path(), "ratings.dat", "1::10::5::0\n2::10::3::0\n1::20::1::0\n");
        let u = write(dir.path(), "users.dat", "1::F::1::10::48067\n2::M::56::16::70072\n");
        let m = write(dir.path(), "movies.dat", "10::A (1995)::Drama\n20::B (1995)::Comedy\n");
        let data = load_movielens(&r, &u, &m).unwrap();
        let labels: Vec<u8> = data.dataset.samples.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![1, 0, 0]);
        assert_eq!(data.dataset.field_count(), 5);
        assert_eq!(data.skipped, 0);
        assert_eq!(data.movie_count, 2);
        // users {1,2}, movies {10,20}, gender {F,M}, age {1,56}, occ {10,16}
        assert_eq!(data.dataset.feature_dimension(), 5 * 3);
        assert_eq!(data.dataset.field_names(), MOVIELENS_FIELDS.map(String::from).to_vec());
    }

    #[test]
    fn malformed_lines_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(dir.path(), "ratings.dat", "1::10::5::0\nbad line\n1::10::9::0\n7::10::4::0\n");
        let u = write(dir.path(), "users.dat", "1::F::1::10::48067\n");
        let m = write(dir.path(), "movies.dat", "10::A::Drama\n");
        let data = load_movielens(&r, &u, &m).unwrap();
        assert_eq!(data.dataset.samples.len(), 1);
        assert_eq!(data.skipped, 3);
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(dir.path(), "ratings.dat", "1::10::5::0\n");
        let m = write(dir.path(), "movies.dat", "10::A::Drama\n");
        let err = load_movielens(&r, &dir.path().join("users.dat"), &m).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("users.dat"));
    }
}
