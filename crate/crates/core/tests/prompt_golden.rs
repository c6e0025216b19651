mod common;

use common::{fixture, golden};
use mcqforge_core::jsonl::read_mcq;
use mcqforge_core::prompt::{
    emit_train_jsonl, load_train_jsonl, render_eval_messages, render_train_example, SYSTEM_PROMPT,
};

fn read_golden(name: &str) -> String {
    std::fs::read_to_string(golden(name)).unwrap()
}

#[test]
fn train_examples_match_golden_bytes() {
    let items = read_mcq(&fixture("prompt_items.jsonl")).unwrap();
    assert_eq!(items.len(), 3);
    for item in &items {
        let rendered = render_train_example(item);
        assert_eq!(rendered.text, read_golden(&format!("{}.train.txt", item.id)), "{}", item.id);
        assert!(rendered.text.starts_with(&rendered.prompt_text));
        let rest = &rendered.text[rendered.prompt_text.len()..];
        assert_eq!(rest, format!("{}<end_of_turn>", item.gold_letter()));
    }
}

#[test]
fn eval_messages_match_golden_bytes() {
    for item in read_mcq(&fixture("prompt_items.jsonl")).unwrap() {
        let (system, user) = render_eval_messages(&item);
        assert_eq!(system, read_golden(&format!("{}.eval_system.txt", item.id)));
        assert_eq!(user, read_golden(&format!("{}.eval_user.txt", item.id)));
    }
}

#[test]
fn system_sentence_is_verbatim() {
    assert_eq!(
        SYSTEM_PROMPT,
        "You're a helpful Arabic assistant that answers multiple-choice questions accurately. \
         Choose the best answer based only on the given question and options."
    );
}

#[test]
fn newline_inside_option_keeps_line_structure() {
    let items = read_mcq(&fixture("prompt_items.jsonl")).unwrap();
    let item = items.iter().find(|i| i.id == "golden-newline").unwrap();
    let text = render_train_example(item).text;
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[2].starts_with("A. "));
    assert!(lines[4].starts_with("B. "));
    assert_eq!(lines[7], "<end_of_turn>");
}

#[test]
fn train_file_round_trip() {
    let items = read_mcq(&fixture("prompt_items.jsonl")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.jsonl");
    assert_eq!(emit_train_jsonl(&items, &path).unwrap(), 3);
    let records = load_train_jsonl(&path).unwrap();
    for (record, item) in records.iter().zip(&items) {
        assert_eq!(record.id, item.id);
        assert_eq!(record.text, read_golden(&format!("{}.train.txt", item.id)));
    }
    let raw = std::fs::read_to_string(&path).unwrap();
    assert!(raw.lines().all(|l| l.starts_with(r#"{"id":"#)));
}
