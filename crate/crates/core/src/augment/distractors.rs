use serde_json::Value;

use super::{templates, PipelineConfig, StageError};
use crate::gateway::{extract_json, ChatClient};
use crate::model::QaPair;
use crate::prompt::fill;
use crate::text;

const KEYS: [&str; 3] = ["A", "B", "C"];

/// Parses a distractor reply and checks it: keys `A`, `B`, `C` (trailing
/// periods ignored, so `"A."` counts as `A`), three non-empty values that
/// differ from each other and from `answer` after normalization.
pub fn parse_distractors(content: &str, answer: &str) -> Result<[String; 3], StageError> {
    let obj = extract_json(content)?;
    let mut slots: [Option<String>; 3] = Default::default();
    for (raw_key, value) in &obj {
        let key = raw_key.trim().trim_end_matches('.').trim().to_ascii_uppercase();
        let Some(pos) = KEYS.iter().position(|k| *k == key) else {
            return Err(StageError::Schema(format!("unexpected key {raw_key:?}")));
        };
        let Value::String(s) = value else {
            return Err(StageError::Schema(format!("value for {raw_key:?} is not a string")));
        };
        if slots[pos].replace(s.trim().to_string()).is_some() {
            return Err(StageError::Schema(format!("key {key} appears twice")));
        }
    }
    let found = slots.iter().filter(|s| s.is_some()).count();
    if found != 3 {
        return Err(StageError::Schema(format!("expected 3 distractors, got {found}")));
    }
    let values: [String; 3] = slots.map(|s| s.expect("all slots filled"));

    let normalized: Vec<String> = values.iter().map(|v| text::normalize(v)).collect();
    if let Some(i) = normalized.iter().position(String::is_empty) {
        return Err(StageError::Schema(format!("distractor {} is empty", KEYS[i])));
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            if normalized[i] == normalized[j] {
                return Err(StageError::DistractorQuality {
                    attempts: 1,
                    reason: format!("distractors {} and {} are identical", KEYS[i], KEYS[j]),
                });
            }
        }
    }
    let gold = text::normalize(answer);
    if let Some(i) = normalized.iter().position(|d| *d == gold) {
        return Err(StageError::DistractorQuality {
            attempts: 1,
            reason: format!("distractor {} equals the correct answer", KEYS[i]),
        });
    }
    Ok(values)
}

/// Requests three distractors, re-drawing up to `cfg.distractor_retries`
/// times when the reply is unusable. Gateway errors are returned at once.
pub async fn generate_distractors(
    qa: &QaPair,
    client: &dyn ChatClient,
    cfg: &PipelineConfig,
) -> Result<[String; 3], StageError> {
    let user = fill(
        templates::DISTRACTOR_USER,
        &[("question", &qa.question), ("answer", &qa.answer)],
    );
    let request = cfg.request(templates::DISTRACTOR_SYSTEM, user, cfg.temperatures.distractor);
    let attempts = cfg.distractor_retries + 1;
    let mut last = None;
    for sample in 0..attempts {
        let reply = client.complete(&request, sample).await?;
        match parse_distractors(&reply.content, &qa.answer) {
            Ok(values) => return Ok(values),
            Err(e) => {
                tracing::debug!(id = %qa.id, sample, error = %e, "distractor reply rejected");
                last = Some(e);
            }
        }
    }
    Err(match last.expect("at least one attempt") {
        StageError::Json(e) => StageError::Json(e),
        StageError::DistractorQuality { reason, .. } => StageError::DistractorQuality { attempts, reason },
        other => StageError::DistractorQuality {
            attempts,
            reason: other.to_string(),
        },
    })
}
