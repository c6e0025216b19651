//! Domain records shared by every stage: free-form QA pairs, four-option
//! MCQ items, assessment verdicts, and dataset splits.
//!
//! Records arrive as raw JSON objects. [`validate_qa`] and [`validate_mcq`]
//! walk every field and report *all* violations at once so a broken input
//! line can be fixed in one pass.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::text;

/// Number of options on every MCQ item.
pub const OPTION_COUNT: usize = 4;

/// Option labels, indexed by option position.
pub const LETTERS: [char; OPTION_COUNT] = ['A', 'B', 'C', 'D'];

pub fn letter_for(index: usize) -> Option<char> {
    LETTERS.get(index).copied()
}

pub fn index_for(letter: char) -> Option<usize> {
    LETTERS.iter().position(|&l| l == letter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Palm,
    PalmxExt,
    User,
}

impl SourceTag {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "palm" => Some(Self::Palm),
            "palmx_ext" => Some(Self::PalmxExt),
            "user" => Some(Self::User),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaFlag {
    UnsureRelevance,
    RefinedAnswer,
}

impl QaFlag {
    fn parse(raw: &str) -> Option<Self> {
        match raw {
            "unsure_relevance" => Some(Self::UnsureRelevance),
            "refined_answer" => Some(Self::RefinedAnswer),
            _ => None,
        }
    }
}

/// A free-form question/answer pair with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    pub source_tag: SourceTag,
    #[serde(default)]
    pub flags: BTreeSet<QaFlag>,
}

/// Where an assembled item came from.
///
/// `answer` holds the (possibly refined) source answer; when present,
/// validation checks it against the gold option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub source_qa_id: String,
    pub distractor_model: String,
    pub shuffle_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

/// A four-option multiple-choice item with a single gold option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub question: String,
    pub options: [String; OPTION_COUNT],
    pub gold_index: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<Lineage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u32>,
}

impl McqItem {
    pub fn gold_option(&self) -> &str {
        &self.options[self.gold_index as usize]
    }

    pub fn gold_letter(&self) -> char {
        LETTERS[self.gold_index as usize]
    }

    /// Checks every item invariant on an already-typed item.
    pub fn check(&self) -> Result<(), ValidationError> {
        let mut issues = Vec::new();
        if text::is_blank(&self.id) {
            issues.push(FieldIssue::EmptyText("id".into()));
        }
        if text::is_blank(&self.question) {
            issues.push(FieldIssue::EmptyText("question".into()));
        }
        check_options(&self.options, &mut issues);
        if self.gold_index as usize >= OPTION_COUNT {
            issues.push(FieldIssue::GoldIndexOutOfRange(self.gold_index as i64));
        } else if let Some(answer) = self.lineage.as_ref().and_then(|l| l.answer.as_deref()) {
            if !text::same_text(answer, self.gold_option()) {
                issues.push(FieldIssue::GoldMismatch {
                    expected: answer.to_string(),
                    found: self.gold_option().to_string(),
                });
            }
        }
        ValidationError::from_issues(issues)
    }
}

fn check_options(options: &[String], issues: &mut Vec<FieldIssue>) {
    for (i, opt) in options.iter().enumerate() {
        if text::is_blank(opt) {
            issues.push(FieldIssue::EmptyText(format!("options[{i}]")));
        }
    }
    let normalized: Vec<String> = options.iter().map(|o| text::normalize(o)).collect();
    for i in 0..normalized.len() {
        for j in (i + 1)..normalized.len() {
            if !normalized[i].is_empty() && normalized[i] == normalized[j] {
                issues.push(FieldIssue::DuplicateOption { first: i, second: j });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerEvaluation {
    Correct,
    Incorrect,
    PartiallyCorrect,
}

impl AnswerEvaluation {
    /// Accepts the literal values of the assessment contract, ignoring case,
    /// spaces, hyphens and underscores ("Partially Correct", "partially_correct").
    pub fn parse(raw: &str) -> Option<Self> {
        match squash(raw).as_str() {
            "correct" => Some(Self::Correct),
            "incorrect" => Some(Self::Incorrect),
            "partiallycorrect" => Some(Self::PartiallyCorrect),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CultureRelevance {
    Yes,
    No,
    Unsure,
}

impl CultureRelevance {
    pub fn parse(raw: &str) -> Option<Self> {
        match squash(raw).as_str() {
            "yes" => Some(Self::Yes),
            "no" => Some(Self::No),
            "unsure" => Some(Self::Unsure),
            _ => None,
        }
    }
}

fn squash(raw: &str) -> String {
    raw.chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Verdict returned by the assessment prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub answer_evaluation: AnswerEvaluation,
    pub corrected_answer: String,
    pub culture_relevance: CultureRelevance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumKey {
    Country,
}

/// Two disjoint halves of a dataset's id set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub half_a: Vec<String>,
    pub half_b: Vec<String>,
    pub stratum_key: StratumKey,
    pub seed: u64,
}

/// A single violated constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldIssue {
    MissingField(String),
    WrongType { field: String, expected: &'static str },
    EmptyText(String),
    BadUrl { value: String, reason: String },
    InvalidValue { field: String, value: String },
    DuplicateId(String),
    OptionCount(usize),
    DuplicateOption { first: usize, second: usize },
    GoldIndexOutOfRange(i64),
    GoldMismatch { expected: String, found: String },
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingField(field) => write!(f, "missing field `{field}`"),
            Self::WrongType { field, expected } => {
                write!(f, "field `{field}` must be {expected}")
            }
            Self::EmptyText(field) => write!(f, "field `{field}` is empty"),
            Self::BadUrl { value, reason } => write!(f, "bad source_url {value:?}: {reason}"),
            Self::InvalidValue { field, value } => {
                write!(f, "field `{field}` has illegal value {value:?}")
            }
            Self::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            Self::OptionCount(n) => write!(f, "expected {OPTION_COUNT} options, found {n}"),
            Self::DuplicateOption { first, second } => {
                write!(f, "options {first} and {second} are identical")
            }
            Self::GoldIndexOutOfRange(i) => write!(f, "gold_index {i} outside 0..=3"),
            Self::GoldMismatch { expected, found } => {
                write!(f, "gold option {found:?} does not match answer {expected:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub issues: Vec<FieldIssue>,
}

impl ValidationError {
    fn from_issues(issues: Vec<FieldIssue>) -> Result<(), Self> {
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Self { issues })
        }
    }

    pub fn has(&self, pred: impl Fn(&FieldIssue) -> bool) -> bool {
        self.issues.iter().any(pred)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Field reader that accumulates issues instead of failing fast.
struct Fields<'a> {
    obj: Option<&'a Map<String, Value>>,
    issues: Vec<FieldIssue>,
}

impl<'a> Fields<'a> {
    fn new(record: &'a Value) -> Self {
        let mut issues = Vec::new();
        let obj = record.as_object();
        if obj.is_none() {
            issues.push(FieldIssue::WrongType {
                field: "<record>".into(),
                expected: "a JSON object",
            });
        }
        Self { obj, issues }
    }

    fn get(&self, field: &str) -> Option<&'a Value> {
        self.obj
            .and_then(|o| o.get(field))
            .filter(|v| !v.is_null())
    }

    fn text(&mut self, field: &str) -> Option<String> {
        self.obj?;
        match self.get(field) {
            None => {
                self.issues.push(FieldIssue::MissingField(field.into()));
                None
            }
            Some(Value::String(s)) if text::is_blank(s) => {
                self.issues.push(FieldIssue::EmptyText(field.into()));
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.issues.push(FieldIssue::WrongType {
                    field: field.into(),
                    expected: "a string",
                });
                None
            }
        }
    }

    fn optional_text(&mut self, field: &str) -> Option<String> {
        match self.get(field) {
            None => None,
            Some(Value::String(s)) if text::is_blank(s) => {
                self.issues.push(FieldIssue::EmptyText(field.into()));
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.issues.push(FieldIssue::WrongType {
                    field: field.into(),
                    expected: "a string",
                });
                None
            }
        }
    }

    fn optional_u64(&mut self, field: &str) -> Option<u64> {
        let v = self.get(field)?;
        let n = v.as_u64();
        if n.is_none() {
            self.issues.push(FieldIssue::WrongType {
                field: field.into(),
                expected: "a non-negative integer",
            });
        }
        n
    }

    fn finish<T>(self, value: Option<T>) -> Result<T, ValidationError> {
        match value {
            Some(v) if self.issues.is_empty() => Ok(v),
            _ => Err(ValidationError {
                issues: self.issues,
            }),
        }
    }
}

fn check_url(raw: &str, issues: &mut Vec<FieldIssue>) {
    match url::Url::parse(raw) {
        Ok(u) if u.has_host() => {}
        Ok(_) => issues.push(FieldIssue::BadUrl {
            value: raw.into(),
            reason: "no host".into(),
        }),
        Err(e) => issues.push(FieldIssue::BadUrl {
            value: raw.into(),
            reason: e.to_string(),
        }),
    }
}

/// Validates one raw QA record. Duplicate ids are a dataset-level check,
/// see [`check_unique_ids`].
pub fn validate_qa(record: &Value) -> Result<QaPair, ValidationError> {
    let mut f = Fields::new(record);
    let id = f.text("id");
    let question = f.text("question");
    let answer = f.text("answer");
    let country = f.optional_text("country");
    let source_url = f.optional_text("source_url");
    if let Some(u) = &source_url {
        check_url(u, &mut f.issues);
    }
    let source_tag = f.text("source_tag").and_then(|raw| {
        let tag = SourceTag::parse(&raw);
        if tag.is_none() {
            f.issues.push(FieldIssue::InvalidValue {
                field: "source_tag".into(),
                value: raw,
            });
        }
        tag
    });
    let mut flags = BTreeSet::new();
    match f.get("flags") {
        None => {}
        Some(Value::Array(items)) => {
            for item in items {
                match item.as_str().and_then(QaFlag::parse) {
                    Some(flag) => {
                        flags.insert(flag);
                    }
                    None => f.issues.push(FieldIssue::InvalidValue {
                        field: "flags".into(),
                        value: item.to_string(),
                    }),
                }
            }
        }
        Some(_) => f.issues.push(FieldIssue::WrongType {
            field: "flags".into(),
            expected: "an array",
        }),
    }
    let pair = match (id, question, answer, source_tag) {
        (Some(id), Some(question), Some(answer), Some(source_tag)) => Some(QaPair {
            id,
            question,
            answer,
            country,
            source_url,
            source_tag,
            flags,
        }),
        _ => None,
    };
    f.finish(pair)
}

/// Validates one raw MCQ record against every item invariant.
pub fn validate_mcq(record: &Value) -> Result<McqItem, ValidationError> {
    let mut f = Fields::new(record);
    let id = f.text("id");
    let question = f.text("question");
    let country = f.optional_text("country");

    let options: Option<[String; OPTION_COUNT]> = match f.get("options") {
        None if f.obj.is_some() => {
            f.issues.push(FieldIssue::MissingField("options".into()));
            None
        }
        None => None,
        Some(Value::Array(items)) => {
            let strings: Vec<String> = items
                .iter()
                .enumerate()
                .filter_map(|(i, v)| match v.as_str() {
                    Some(s) => Some(s.to_string()),
                    None => {
                        f.issues.push(FieldIssue::WrongType {
                            field: format!("options[{i}]"),
                            expected: "a string",
                        });
                        None
                    }
                })
                .collect();
            if items.len() != OPTION_COUNT {
                f.issues.push(FieldIssue::OptionCount(items.len()));
            }
            check_options(&strings, &mut f.issues);
            strings.try_into().ok()
        }
        Some(_) => {
            f.issues.push(FieldIssue::WrongType {
                field: "options".into(),
                expected: "an array",
            });
            None
        }
    };

    let gold_index = match f.get("gold_index") {
        None if f.obj.is_some() => {
            f.issues.push(FieldIssue::MissingField("gold_index".into()));
            None
        }
        None => None,
        Some(v) => match v.as_i64() {
            Some(i) if (0..OPTION_COUNT as i64).contains(&i) => Some(i as u8),
            Some(i) => {
                f.issues.push(FieldIssue::GoldIndexOutOfRange(i));
                None
            }
            None => {
                f.issues.push(FieldIssue::WrongType {
                    field: "gold_index".into(),
                    expected: "an integer",
                });
                None
            }
        },
    };

    let lineage = match f.get("lineage") {
        None => None,
        Some(v) => match serde_json::from_value::<Lineage>(v.clone()) {
            Ok(l) => Some(l),
            Err(e) => {
                f.issues.push(FieldIssue::InvalidValue {
                    field: "lineage".into(),
                    value: e.to_string(),
                });
                None
            }
        },
    };

    let token_count = f.optional_u64("token_count").map(|n| n.min(u32::MAX as u64) as u32);

    if let (Some(opts), Some(gold), Some(answer)) = (
        &options,
        gold_index,
        lineage.as_ref().and_then(|l| l.answer.as_deref()),
    ) {
        let found = &opts[gold as usize];
        if !text::same_text(answer, found) {
            f.issues.push(FieldIssue::GoldMismatch {
                expected: answer.to_string(),
                found: found.clone(),
            });
        }
    }

    let item = match (id, question, options, gold_index) {
        (Some(id), Some(question), Some(options), Some(gold_index)) => Some(McqItem {
            id,
            question,
            options,
            gold_index,
            country,
            lineage,
            token_count,
        }),
        _ => None,
    };
    f.finish(item)
}

/// Dataset-level id uniqueness.
pub fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<(), ValidationError> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dups.insert(id);
        }
    }
    ValidationError::from_issues(
        dups.into_iter()
            .map(|id| FieldIssue::DuplicateId(id.to_string()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn minimal_qa_record_is_valid() {
        let qa = validate_qa(&json!({"id":"p1","question":"س؟","answer":"ج","source_tag":"palm"}))
            .unwrap();
        assert_eq!(qa.id, "p1");
        assert_eq!(qa.source_tag, SourceTag::Palm);
        assert!(qa.flags.is_empty());
    }

    #[test]
    fn whitespace_question_is_rejected() {
        let err = validate_qa(&json!({"id":"p2","question":"  ","answer":"ج"})).unwrap_err();
        assert!(err.has(|i| *i == FieldIssue::EmptyText("question".into())));
    }

    #[test]
    fn every_violation_is_listed() {
        let err = validate_qa(&json!({
            "question":"", "answer":"ج", "source_url":"not a url", "source_tag":"web"
        }))
        .unwrap_err();
        assert!(err.has(|i| *i == FieldIssue::MissingField("id".into())));
        assert!(err.has(|i| *i == FieldIssue::EmptyText("question".into())));
        assert!(err.has(|i| matches!(i, FieldIssue::BadUrl { .. })));
        assert!(err.has(|i| matches!(i, FieldIssue::InvalidValue { field, .. } if field == "source_tag")));
    }

    #[test]
    fn relative_url_is_bad() {
        let err = validate_qa(&json!({
            "id":"p","question":"q","answer":"a","source_tag":"user","source_url":"/gov/page"
        }))
        .unwrap_err();
        assert!(err.has(|i| matches!(i, FieldIssue::BadUrl { .. })));
    }

    #[test]
    fn non_object_record() {
        assert!(validate_qa(&json!([1, 2])).is_err());
        assert!(validate_mcq(&json!("x")).is_err());
    }

    #[test]
    fn duplicate_ids_detected() {
        let err = check_unique_ids(["a", "b", "a", "c", "b"]).unwrap_err();
        assert_eq!(
            err.issues,
            vec![
                FieldIssue::DuplicateId("a".into()),
                FieldIssue::DuplicateId("b".into())
            ]
        );
        assert!(check_unique_ids(["a", "b"]).is_ok());
    }

    fn mcq(options: Value, gold: Value) -> Value {
        json!({
            "id": "m1",
            "question": "ما هي عاصمة قطر؟",
            "options": options,
            "gold_index": gold,
            "lineage": {"source_qa_id":"p1","distractor_model":"m","shuffle_seed":7,"answer":"الدوحة"}
        })
    }

    #[test]
    fn valid_mcq() {
        let item = validate_mcq(&mcq(json!(["الرياض", "دبي", "الدوحة", "مسقط"]), json!(2))).unwrap();
        assert_eq!(item.gold_option(), "الدوحة");
        assert_eq!(item.gold_letter(), 'C');
        item.check().unwrap();
    }

    #[test]
    fn three_options() {
        let err = validate_mcq(&mcq(json!(["الرياض", "دبي", "الدوحة"]), json!(2))).unwrap_err();
        assert!(err.has(|i| *i == FieldIssue::OptionCount(3)));
    }

    #[test]
    fn gold_index_four() {
        let err =
            validate_mcq(&mcq(json!(["الرياض", "دبي", "الدوحة", "مسقط"]), json!(4))).unwrap_err();
        assert!(err.has(|i| *i == FieldIssue::GoldIndexOutOfRange(4)));
    }

    #[test]
    fn duplicate_after_normalization() {
        let err = validate_mcq(&mcq(json!(["الرياض", " دبي ", "الدوحة", "دبي"]), json!(2)))
            .unwrap_err();
        assert!(err.has(|i| *i == FieldIssue::DuplicateOption { first: 1, second: 3 }));
    }

    #[test]
    fn gold_mismatch() {
        let err =
            validate_mcq(&mcq(json!(["الرياض", "دبي", "الدوحة", "مسقط"]), json!(0))).unwrap_err();
        assert!(err.has(|i| matches!(i, FieldIssue::GoldMismatch { .. })));
    }

    #[test]
    fn enum_literals_case_normalized() {
        assert_eq!(
            AnswerEvaluation::parse("Partially Correct"),
            Some(AnswerEvaluation::PartiallyCorrect)
        );
        assert_eq!(AnswerEvaluation::parse("CORRECT"), Some(AnswerEvaluation::Correct));
        assert_eq!(AnswerEvaluation::parse("Maybe"), None);
        assert_eq!(CultureRelevance::parse(" unsure "), Some(CultureRelevance::Unsure));
        assert_eq!(CultureRelevance::parse("Y"), None);
    }

    #[test]
    fn letters_are_a_bijection() {
        for i in 0..OPTION_COUNT {
            assert_eq!(index_for(letter_for(i).unwrap()), Some(i));
        }
        assert_eq!(letter_for(4), None);
        assert_eq!(index_for('E'), None);
    }
}
