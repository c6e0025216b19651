use serde_json::{Map, Value};

use super::{templates, PipelineConfig, StageError, UnsurePolicy};
use crate::gateway::{extract_json, ChatClient};
use crate::model::{AnswerEvaluation, Assessment, CultureRelevance, QaFlag, QaPair};
use crate::prompt::fill;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    FactuallyIncorrect,
    Irrelevant,
    UnsureRelevance,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FactuallyIncorrect => "factually_incorrect",
            Self::Irrelevant => "irrelevant",
            Self::UnsureRelevance => "unsure_relevance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssessmentDecision {
    Keep(QaPair),
    Drop(DropReason),
}

fn string_field<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str, StageError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(StageError::Schema(format!("`{field}` is not a string: {other}"))),
        None => Err(StageError::Schema(format!("missing `{field}`"))),
    }
}

pub(crate) fn parse_assessment(content: &str) -> Result<Assessment, StageError> {
    let obj = extract_json(content)?;
    let evaluation = string_field(&obj, "answer_evaluation")?;
    let answer_evaluation = AnswerEvaluation::parse(evaluation)
        .ok_or_else(|| StageError::Schema(format!("illegal answer_evaluation {evaluation:?}")))?;
    let corrected_answer = string_field(&obj, "corrected_answer")?.trim().to_string();
    let relevance = string_field(&obj, "culture_relevance")?;
    let culture_relevance = CultureRelevance::parse(relevance)
        .ok_or_else(|| StageError::Schema(format!("illegal culture_relevance {relevance:?}")))?;
    Ok(Assessment {
        answer_evaluation,
        corrected_answer,
        culture_relevance,
    })
}

/// Asks the model to grade the answer, optionally rewrite it, and judge
/// cultural relevance.
pub async fn assess_qa(
    qa: &QaPair,
    client: &dyn ChatClient,
    cfg: &PipelineConfig,
) -> Result<Assessment, StageError> {
    let user = fill(
        templates::ASSESS_USER,
        &[("question", &qa.question), ("answer", &qa.answer)],
    );
    let request = cfg.request(templates::ASSESS_SYSTEM, user, cfg.temperatures.assess);
    let reply = client.complete(&request, 0).await?;
    parse_assessment(&reply.content)
}

pub fn apply_assessment(qa: &QaPair, a: &Assessment, cfg: &PipelineConfig) -> AssessmentDecision {
    if a.answer_evaluation == AnswerEvaluation::Incorrect {
        return AssessmentDecision::Drop(DropReason::FactuallyIncorrect);
    }
    let mut kept = qa.clone();
    match a.culture_relevance {
        CultureRelevance::No => return AssessmentDecision::Drop(DropReason::Irrelevant),
        CultureRelevance::Unsure => match cfg.unsure_policy {
            UnsurePolicy::Drop => return AssessmentDecision::Drop(DropReason::UnsureRelevance),
            UnsurePolicy::KeepFlagged => {
                kept.flags.insert(QaFlag::UnsureRelevance);
            }
        },
        CultureRelevance::Yes => {}
    }
    if !a.corrected_answer.trim().is_empty() {
        kept.answer = a.corrected_answer.trim().to_string();
        kept.flags.insert(QaFlag::RefinedAnswer);
    }
    AssessmentDecision::Keep(kept)
}
