//! Seeded sample export for manual quality review.

use std::path::{Path, PathBuf};

use rand::seq::index;
use thiserror::Error;

use crate::jsonl;
use crate::model::{McqItem, LETTERS};
use crate::seeding;

pub const REVIEW_HEADER: [&str; 6] = ["id", "question", "options", "gold", "accuracy_score", "clarity_score"];

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("cannot sample {requested} items from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("{path}: {message}")]
    Write { path: PathBuf, message: String },
}

/// Uniform sample of `n` items without replacement, returned in id order.
/// Input order does not affect the result.
pub fn select_for_review(items: &[McqItem], n: usize, seed: u64) -> Result<Vec<&McqItem>, ReviewError> {
    if n > items.len() {
        return Err(ReviewError::SampleTooLarge {
            requested: n,
            available: items.len(),
        });
    }
    let mut sorted: Vec<&McqItem> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = seeding::rng_for(seed, "review", "");
    let mut picked: Vec<&McqItem> = index::sample(&mut rng, sorted.len(), n)
        .into_iter()
        .map(|i| sorted[i])
        .collect();
    picked.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(picked)
}

/// CSV sheet with empty score columns (0-10 scale) for reviewers to fill.
pub fn write_review_sheet(path: &Path, items: &[&McqItem]) -> Result<(), ReviewError> {
    let fail = |message: String| ReviewError::Write {
        path: path.to_path_buf(),
        message,
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(REVIEW_HEADER).map_err(|e| fail(e.to_string()))?;
    for item in items {
        let options = item
            .options
            .iter()
            .zip(LETTERS)
            .map(|(o, l)| format!("{l}. {o}"))
            .collect::<Vec<_>>()
            .join("\n");
        writer
            .write_record([
                item.id.as_str(),
                item.question.as_str(),
                options.as_str(),
                &item.gold_letter().to_string(),
                "",
                "",
            ])
            .map_err(|e| fail(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| fail(e.to_string()))?;
    jsonl::write_atomic(path, &bytes).map_err(|e| fail(e.to_string()))
}

pub fn sample_for_review(items: &[McqItem], n: usize, seed: u64, path: &Path) -> Result<Vec<String>, ReviewError> {
    let picked = select_for_review(items, n, seed)?;
    write_review_sheet(path, &picked)?;
    Ok(picked.iter().map(|i| i.id.clone()).collect())
}
