//! Byte-exact rendering of the fine-tuning sequence and the evaluation
//! messages, plus `train.jsonl` emission and loading.
//!
//! Templates live under `templates/` and are compiled in. Placeholders are
//! `{name}`; substitution is a single pass, so braces inside questions or
//! options are never re-expanded.

use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl;
use crate::model::{McqItem, LETTERS};

/// System sentence used for both training and evaluation.
pub const SYSTEM_PROMPT: &str = include_str!("../templates/system.txt");
const TRAIN_TEMPLATE: &str = include_str!("../templates/train.txt");
const EVAL_USER_TEMPLATE: &str = include_str!("../templates/eval_user.txt");

const ANSWER_SLOT: &str = "{answer}";

/// Marker closing each turn of the training sequence.
pub const END_OF_TURN: &str = "<end_of_turn>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedExample {
    pub id: String,
    /// Full training sequence, gold answer turn included.
    pub text: String,
    /// `text` cut just before the model's answer.
    pub prompt_text: String,
}

/// One `train.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRecord {
    pub id: String,
    pub text: String,
}

/// Replaces each `{name}` whose name appears in `vars`; any other brace
/// sequence is copied through untouched.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let hit = tail.find('}').and_then(|close| {
            let name = &tail[1..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match hit {
            Some((value, close)) => {
                out.push_str(value);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn render(template: &str, item: &McqItem) -> String {
    fill(
        template,
        &[
            ("system", SYSTEM_PROMPT),
            ("question", &item.question),
            ("option_a", &item.options[0]),
            ("option_b", &item.options[1]),
            ("option_c", &item.options[2]),
            ("option_d", &item.options[3]),
        ],
    )
}

pub fn render_train_example(item: &McqItem) -> RenderedExample {
    let slot = TRAIN_TEMPLATE
        .find(ANSWER_SLOT)
        .expect("train template has an answer slot");
    let prompt_text = render(&TRAIN_TEMPLATE[..slot], item);
    let suffix = &TRAIN_TEMPLATE[slot + ANSWER_SLOT.len()..];
    let mut text = prompt_text.clone();
    text.push(LETTERS[item.gold_index as usize]);
    text.push_str(suffix);
    RenderedExample {
        id: item.id.clone(),
        text,
        prompt_text,
    }
}

/// `(system, user)` messages for zero-shot evaluation.
pub fn render_eval_messages(item: &McqItem) -> (String, String) {
    (SYSTEM_PROMPT.to_string(), render(EVAL_USER_TEMPLATE, item))
}

#[derive(Debug, Error)]
pub enum TrainFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub fn emit_train_jsonl(items: &[McqItem], path: &Path) -> Result<usize, TrainFileError> {
    let records: Vec<TrainRecord> = items
        .iter()
        .map(|item| {
            let r = render_train_example(item);
            TrainRecord { id: r.id, text: r.text }
        })
        .collect();
    jsonl::write_atomic(path, jsonl::canonical_document(&records).as_bytes()).map_err(|source| {
        TrainFileError::Io {
            path: path.to_path_buf(),
            source,
        }
    })?;
    Ok(records.len())
}

pub fn load_train_jsonl(path: &Path) -> Result<Vec<TrainRecord>, TrainFileError> {
    let io_err = |source| TrainFileError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrainRecord =
            serde_json::from_str(&line).map_err(|e| TrainFileError::Schema {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(gold: u8) -> McqItem {
        McqItem {
            id: "m1".into(),
            question: "ما هي عاصمة قطر؟".into(),
            options: ["الرياض".into(), "دبي".into(), "الدوحة".into(), "مسقط".into()],
            gold_index: gold,
            country: Some("QA".into()),
            lineage: None,
            token_count: None,
        }
    }

    #[test]
    fn system_sentence_verbatim() {
        assert_eq!(
            SYSTEM_PROMPT,
            "You're a helpful Arabic assistant that answers multiple-choice questions accurately. \
             Choose the best answer based only on the given question and options."
        );
    }

    #[test]
    fn prompt_is_strict_prefix_and_ends_with_marker() {
        let r = render_train_example(&item(2));
        assert!(r.text.starts_with(&r.prompt_text));
        assert!(r.text.len() > r.prompt_text.len());
        assert!(r.text.ends_with(END_OF_TURN));
        assert_eq!(&r.text[r.prompt_text.len()..], "C<end_of_turn>");
    }

    #[test]
    fn gold_index_changes_only_the_answer_letter() {
        let a = render_train_example(&item(0));
        let b = render_train_example(&item(3));
        assert_eq!(a.prompt_text, b.prompt_text);
        assert!(a.text.ends_with("A<end_of_turn>"));
        assert!(b.text.ends_with("D<end_of_turn>"));
    }

    #[test]
    fn placeholders_in_content_are_not_expanded() {
        let mut it = item(1);
        it.question = "ما معنى {option_a} و{answer} و{؟".into();
        let (_, user) = render_eval_messages(&it);
        assert!(user.starts_with("ما معنى {option_a} و{answer} و{؟\n"));
        let r = render_train_example(&it);
        assert!(r.prompt_text.contains("ما معنى {option_a} و{answer} و{؟\n"));
    }

    #[test]
    fn eval_user_has_four_label_lines() {
        let (system, user) = render_eval_messages(&item(0));
        assert_eq!(system, SYSTEM_PROMPT);
        let labels = user
            .lines()
            .filter(|l| ["A. ", "B. ", "C. ", "D. "].iter().any(|p| l.starts_with(p)))
            .count();
        assert_eq!(labels, 4);
        assert!(user.ends_with("\nAnswer with the letter only."));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        fs::write(&path, "{\"id\":\"a\",\"text\":\"t\"}\n{\"id\":\"b\"}\n").unwrap();
        match load_train_jsonl(&path) {
            Err(TrainFileError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
