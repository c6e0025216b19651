//! Canonical JSONL: one UTF-8 JSON object per line, keys sorted
//! lexicographically at every depth, `\n` line endings, nothing trailing.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{self, McqItem, QaPair, ValidationError};

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed JSON: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    Invalid {
        path: PathBuf,
        line: usize,
        #[source]
        source: ValidationError,
    },
    #[error("{path}: {source}")]
    Dataset {
        path: PathBuf,
        #[source]
        source: ValidationError,
    },
}

impl JsonlError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for errors caused by file contents rather than the filesystem.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Self::Io { .. })
    }
}

/// Serializes `value` as a single canonical line (no newline).
pub fn canonical_line<T: Serialize + ?Sized>(value: &T) -> String {
    // Value's object map is ordered, so this sorts keys at every level.
    let v = serde_json::to_value(value).expect("record serializes to JSON");
    serde_json::to_string(&v).expect("JSON value serializes")
}

pub fn canonical_document<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&canonical_line(r));
        out.push('\n');
    }
    out
}

/// Writes the file atomically: contents land in a sibling temp file first.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    write_atomic(path, canonical_document(records).as_bytes()).map_err(|e| JsonlError::io(path, e))
}

/// Reads every non-blank line as a JSON value, paired with its 1-based line number.
pub fn read_values(path: &Path) -> Result<Vec<(usize, Value)>, JsonlError> {
    let file = fs::File::open(path).map_err(|e| JsonlError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| JsonlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

fn read_validated<T>(
    path: &Path,
    validate: impl Fn(&Value) -> Result<T, ValidationError>,
    id_of: impl Fn(&T) -> &str,
) -> Result<Vec<T>, JsonlError> {
    let mut records = Vec::new();
    for (line, value) in read_values(path)? {
        let record = validate(&value).map_err(|source| JsonlError::Invalid {
            path: path.to_path_buf(),
            line,
            source,
        })?;
        records.push(record);
    }
    model::check_unique_ids(records.iter().map(&id_of)).map_err(|source| JsonlError::Dataset {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(records)
}

pub fn read_qa(path: &Path) -> Result<Vec<QaPair>, JsonlError> {
    read_validated(path, model::validate_qa, |q| &q.id)
}

pub fn read_mcq(path: &Path) -> Result<Vec<McqItem>, JsonlError> {
    read_validated(path, model::validate_mcq, |m| &m.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_at_every_depth() {
        let v = json!({"b": 1, "a": {"z": true, "c": null}, "é": "س"});
        assert_eq!(canonical_line(&v), r#"{"a":{"c":null,"z":true},"b":1,"é":"س"}"#);
    }

    #[test]
    fn reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        fs::write(&path, "{\"a\":1}\n\n{oops\n").unwrap();
        match read_values(&path) {
            Err(JsonlError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected_at_dataset_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.jsonl");
        let rec = json!({"id":"p1","question":"q","answer":"a","source_tag":"palm"});
        fs::write(&path, format!("{rec}\n{rec}\n")).unwrap();
        assert!(matches!(read_qa(&path), Err(JsonlError::Dataset { .. })));
    }

    #[test]
    fn invalid_record_carries_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.jsonl");
        fs::write(
            &path,
            "{\"id\":\"p1\",\"question\":\"q\",\"answer\":\"a\",\"source_tag\":\"palm\"}\n{\"id\":\"p2\",\"question\":\" \",\"answer\":\"a\",\"source_tag\":\"palm\"}\n",
        )
        .unwrap();
        match read_qa(&path) {
            Err(JsonlError::Invalid { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
