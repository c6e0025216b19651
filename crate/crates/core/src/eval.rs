//! Zero-shot MCQ evaluation: querying a model, reading its choice out of
//! free text, and aggregating accuracy into per-model reports and
//! model-by-dataset comparison tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatClient, ChatRequest, GatewayError, ResponseFormat};
use crate::jsonl::{self, JsonlError};
use crate::model::{index_for, McqItem};
use crate::prompt::render_eval_messages;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub model: String,
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_index: Option<u8>,
    pub correct: bool,
    pub latency_ms: u64,
    /// Why no response was obtained, when the request itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    fn scored(item: &McqItem, model: &str, raw: String, latency_ms: u64) -> Self {
        let predicted = extract_choice(&raw, &item.options).map(|i| i as u8);
        Self {
            item_id: item.id.clone(),
            model: model.to_string(),
            correct: predicted == Some(item.gold_index),
            predicted_index: predicted,
            raw_response: raw,
            latency_ms,
            error: None,
        }
    }

    fn failed(item: &McqItem, model: &str, reason: String) -> Self {
        Self {
            item_id: item.id.clone(),
            model: model.to_string(),
            raw_response: String::new(),
            predicted_index: None,
            correct: false,
            latency_ms: 0,
            error: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub n_items: usize,
    pub n_correct: usize,
    pub n_unparsed: usize,
    pub accuracy_pct: f64,
}

impl EvalReport {
    pub fn from_records(model: &str, dataset: &str, records: &[EvalRecord]) -> Result<Self, EvalError> {
        Ok(Self {
            model: model.to_string(),
            dataset: dataset.to_string(),
            n_items: records.len(),
            n_correct: records.iter().filter(|r| r.correct).count(),
            n_unparsed: records.iter().filter(|r| r.predicted_index.is_none()).count(),
            accuracy_pct: accuracy(records)?,
        })
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot compute accuracy over zero items")]
    EmptyEvalSet,
    #[error("more than one report for model {model:?} on dataset {dataset:?}")]
    DuplicateModelDataset { model: String, dataset: String },
    #[error("response for unknown item {0:?}")]
    UnknownItem(String),
    #[error(transparent)]
    Input(#[from] JsonlError),
    #[error("aborting: {0}")]
    Gateway(GatewayError),
}

/// Reads an option choice out of a model reply.
///
/// Rules, first match wins:
/// 1. the whole reply (trimmed) is `A`-`D`, optionally followed by `.` or `)`;
/// 2. the first standalone Latin `A`-`D` anywhere in the reply;
/// 3. the longest option text quoted verbatim in the reply.
pub fn extract_choice(raw: &str, options: &[String]) -> Option<usize> {
    let trimmed = raw.trim();
    let bare = trimmed
        .strip_suffix('.')
        .or_else(|| trimmed.strip_suffix(')'))
        .unwrap_or(trimmed);
    let mut chars = bare.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if let Some(i) = index_for(c) {
            return Some(i);
        }
    }

    let chars: Vec<char> = raw.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let Some(idx) = index_for(c) else { continue };
        let before = i.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i + 1).copied();
        let standalone = |n: Option<char>| n.is_none_or(|n| !n.is_alphanumeric());
        if standalone(before) && standalone(after) {
            return Some(idx);
        }
    }

    options
        .iter()
        .enumerate()
        .map(|(i, o)| (i, o.trim()))
        .filter(|(_, o)| !o.is_empty() && raw.contains(o))
        .fold(None, |best: Option<(usize, usize)>, (i, o)| match best {
            Some((_, len)) if len >= o.chars().count() => best,
            _ => Some((i, o.chars().count())),
        })
        .map(|(i, _)| i)
}

/// Accuracy in hundredths of a percent, rounded half up.
pub fn accuracy_basis_points(correct: usize, total: usize) -> Option<u64> {
    if total == 0 {
        return None;
    }
    let (c, t) = (correct as u64, total as u64);
    Some((20_000 * c + t) / (2 * t))
}

/// `100 * correct / total`, rounded half up to two decimals.
pub fn accuracy(records: &[EvalRecord]) -> Result<f64, EvalError> {
    let correct = records.iter().filter(|r| r.correct).count();
    accuracy_basis_points(correct, records.len())
        .map(|bp| bp as f64 / 100.0)
        .ok_or(EvalError::EmptyEvalSet)
}

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub model: String,
    pub dataset: String,
    pub max_tokens: u32,
    pub parallelism: usize,
}

impl EvalSettings {
    pub fn new(model: impl Into<String>, dataset: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            dataset: dataset.into(),
            max_tokens: 16,
            parallelism: 4,
        }
    }
}

/// Queries the model once per item at temperature 0 and scores the replies.
/// Records come back sorted by item id.
pub async fn evaluate_model(
    items: &[McqItem],
    client: &dyn ChatClient,
    settings: &EvalSettings,
) -> Result<(Vec<EvalRecord>, EvalReport), EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyEvalSet);
    }
    let results: Vec<Result<EvalRecord, GatewayError>> = stream::iter(items)
        .map(|item| async move {
            let (system, user) = render_eval_messages(item);
            let request = ChatRequest {
                model: settings.model.clone(),
                system,
                user,
                temperature: 0.0,
                max_tokens: settings.max_tokens,
                response_format: ResponseFormat::Text,
            };
            match client.complete(&request, 0).await {
                Ok(resp) => Ok(EvalRecord::scored(item, &settings.model, resp.content, resp.latency_ms)),
                Err(e) if e.is_fatal() => Err(e),
                Err(e) => {
                    tracing::warn!(item = %item.id, error = %e, "no response; counting as unparsed");
                    Ok(EvalRecord::failed(item, &settings.model, e.to_string()))
                }
            }
        })
        .buffer_unordered(settings.parallelism.max(1))
        .collect()
        .await;
    let mut records = results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(EvalError::Gateway)?;
    records.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let report = EvalReport::from_records(&settings.model, &settings.dataset, &records)?;
    Ok((records, report))
}

/// One line of a raw responses file produced by an external generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseLine {
    pub item_id: String,
    pub raw_response: String,
}

/// Scores pre-generated responses. Items without a response count as
/// unparsed; a response for an unknown item is an error.
pub fn score_responses(
    items: &[McqItem],
    responses: &[ResponseLine],
    model: &str,
    dataset: &str,
) -> Result<(Vec<EvalRecord>, EvalReport), EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyEvalSet);
    }
    let known: HashSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let mut by_id: HashMap<&str, &str> = HashMap::new();
    for r in responses {
        if !known.contains(r.item_id.as_str()) {
            return Err(EvalError::UnknownItem(r.item_id.clone()));
        }
        by_id.insert(&r.item_id, &r.raw_response);
    }
    let mut records: Vec<EvalRecord> = items
        .iter()
        .map(|item| match by_id.get(item.id.as_str()) {
            Some(raw) => EvalRecord::scored(item, model, raw.to_string(), 0),
            None => EvalRecord::failed(item, model, "no response".into()),
        })
        .collect();
    records.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let report = EvalReport::from_records(model, dataset, &records)?;
    Ok((records, report))
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseLine>, EvalError> {
    jsonl::read_values(path)?
        .into_iter()
        .map(|(line, v)| {
            serde_json::from_value(v).map_err(|e| {
                EvalError::Input(JsonlError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

/// Placeholder for a model that was not run on a dataset (an em dash).
pub const MISSING_CELL: &str = "\u{2014}";

/// Models as rows, datasets as columns, accuracies in the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub datasets: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

/// Arranges reports into a table. Rows and columns keep first-seen order.
pub fn compare_models(reports: &[EvalReport]) -> Result<ComparisonTable, EvalError> {
    let mut datasets: Vec<String> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for r in reports {
        let d = match datasets.iter().position(|x| *x == r.dataset) {
            Some(i) => i,
            None => {
                datasets.push(r.dataset.clone());
                datasets.len() - 1
            }
        };
        let m = match models.iter().position(|x| *x == r.model) {
            Some(i) => i,
            None => {
                models.push(r.model.clone());
                models.len() - 1
            }
        };
        if cells.insert((m, d), r.accuracy_pct).is_some() {
            return Err(EvalError::DuplicateModelDataset {
                model: r.model.clone(),
                dataset: r.dataset.clone(),
            });
        }
    }
    let rows = models
        .into_iter()
        .enumerate()
        .map(|(m, name)| {
            let row = (0..datasets.len()).map(|d| cells.get(&(m, d)).copied()).collect();
            (name, row)
        })
        .collect();
    Ok(ComparisonTable { datasets, rows })
}

impl ComparisonTable {
    fn cell_key(v: f64) -> i64 {
        (v * 100.0).round() as i64
    }

    /// Best value of each column, ties included.
    pub fn best(&self, column: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|(_, row)| row[column])
            .max_by_key(|v| Self::cell_key(*v))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model |");
        for d in &self.datasets {
            let _ = write!(out, " {d} |");
        }
        out.push_str("\n|:--|");
        for _ in &self.datasets {
            out.push_str("--:|");
        }
        out.push('\n');
        let best: Vec<Option<i64>> = (0..self.datasets.len())
            .map(|c| self.best(c).map(Self::cell_key))
            .collect();
        for (model, row) in &self.rows {
            let _ = write!(out, "| {model} |");
            for (c, cell) in row.iter().enumerate() {
                match cell {
                    Some(v) if Some(Self::cell_key(*v)) == best[c] => {
                        let _ = write!(out, " **{v:.2}** |");
                    }
                    Some(v) => {
                        let _ = write!(out, " {v:.2} |");
                    }
                    None => {
                        let _ = write!(out, " {MISSING_CELL} |");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
