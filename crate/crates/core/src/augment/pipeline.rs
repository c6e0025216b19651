//! End-to-end driver for the augmentation stages.

use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    apply_assessment, assemble_mcq, assess_qa, filter_by_domain, generate_distractors,
    guard_token_limit, identify_country, AssessmentDecision, GuardVerdict, PipelineConfig,
    StageError,
};
use crate::gateway::{ChatClient, GatewayError};
use crate::jsonl::{self, JsonlError};
use crate::model::{self, McqItem, QaPair, ValidationError};
use crate::text;
use crate::tokens::TokenCounter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Country,
    Assess,
    Domain,
    Distractor,
    Assemble,
    TokenGuard,
}

/// One line of `rejected.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub qa_id: String,
    pub stage: Stage,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub accepted: Vec<McqItem>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(#[from] JsonlError),
    #[error("input: {0}")]
    Duplicates(ValidationError),
    #[error("aborting: {0}")]
    Gateway(GatewayError),
}

enum Outcome {
    Accepted { item: McqItem, length_ratio: f64 },
    Rejected(Rejection),
}

fn reject(qa: &QaPair, stage: Stage, reason: impl Into<String>) -> Outcome {
    Outcome::Rejected(Rejection {
        qa_id: qa.id.clone(),
        stage,
        reason: reason.into(),
        token_count: None,
    })
}

/// Turns a stage error into a rejection, or surfaces errors that would hit
/// every item (bad credentials, unusable cache).
fn stage_failure(qa: &QaPair, stage: Stage, err: StageError) -> Result<Outcome, GatewayError> {
    match err {
        StageError::Gateway(e) if e.is_fatal() => Err(e),
        other => Ok(reject(qa, stage, other.to_string())),
    }
}

async fn process(
    qa: &QaPair,
    cfg: &PipelineConfig,
    client: &dyn ChatClient,
    counter: &dyn TokenCounter,
) -> Result<Outcome, GatewayError> {
    let mut qa = qa.clone();

    if qa.country.is_none() {
        match identify_country(&qa, client, cfg).await {
            Ok(tag) => qa.country = Some(tag.code),
            Err(e) => return stage_failure(&qa, Stage::Country, e),
        }
    }

    if !filter_by_domain(&qa, cfg.domain_allowlist.as_ref()) {
        let host = qa.source_url.as_deref().unwrap_or("<no source_url>");
        return Ok(reject(&qa, Stage::Domain, format!("source not allowlisted: {host}")));
    }

    let assessment = match assess_qa(&qa, client, cfg).await {
        Ok(a) => a,
        Err(e) => return stage_failure(&qa, Stage::Assess, e),
    };
    let qa = match apply_assessment(&qa, &assessment, cfg) {
        AssessmentDecision::Keep(kept) => kept,
        AssessmentDecision::Drop(reason) => return Ok(reject(&qa, Stage::Assess, reason.as_str())),
    };

    let distractors = match generate_distractors(&qa, client, cfg).await {
        Ok(d) => d,
        Err(e) => return stage_failure(&qa, Stage::Distractor, e),
    };

    let item = match assemble_mcq(&qa, &distractors, cfg.shuffle_seed, &cfg.model) {
        Ok(item) => item,
        Err(e) => return stage_failure(&qa, Stage::Assemble, e),
    };

    match guard_token_limit(item, counter, cfg.max_prompt_tokens) {
        GuardVerdict::Pass(item) => {
            let answer_len = text::normalize(&qa.answer).chars().count().max(1) as f64;
            let mean_distractor =
                distractors.iter().map(|d| text::normalize(d).chars().count()).sum::<usize>() as f64 / 3.0;
            Ok(Outcome::Accepted {
                item: *item,
                length_ratio: mean_distractor / answer_len,
            })
        }
        GuardVerdict::Reject { count } => Ok(Outcome::Rejected(Rejection {
            qa_id: qa.id.clone(),
            stage: Stage::TokenGuard,
            reason: format!("{count} tokens exceeds limit {}", cfg.max_prompt_tokens),
            token_count: Some(count),
        })),
    }
}

/// Runs every item through the stages with up to `cfg.parallelism` items in
/// flight. Per-item failures become rejections; output is sorted by id.
pub async fn run_pipeline(
    items: &[QaPair],
    cfg: &PipelineConfig,
    client: &dyn ChatClient,
    counter: &dyn TokenCounter,
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    model::check_unique_ids(items.iter().map(|q| q.id.as_str())).map_err(PipelineError::Duplicates)?;

    let outcomes: Vec<Result<Outcome, GatewayError>> = stream::iter(items)
        .map(|qa| process(qa, cfg, client, counter))
        .buffer_unordered(cfg.parallelism)
        .collect()
        .await;

    let mut output = PipelineOutput::default();
    let mut ratios = Vec::new();
    for outcome in outcomes {
        match outcome.map_err(PipelineError::Gateway)? {
            Outcome::Accepted { item, length_ratio } => {
                ratios.push(length_ratio);
                output.accepted.push(item);
            }
            Outcome::Rejected(r) => output.rejected.push(r),
        }
    }
    output.accepted.sort_by(|a, b| a.id.cmp(&b.id));
    output.rejected.sort_by(|a, b| a.qa_id.cmp(&b.qa_id));

    let mean_ratio = if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    };
    tracing::info!(
        input = items.len(),
        accepted = output.accepted.len(),
        rejected = output.rejected.len(),
        distractor_to_answer_length = ?mean_ratio,
        "augmentation finished"
    );
    Ok(output)
}

/// Reads `source`, runs the pipeline, and writes the accepted items and the
/// rejection ledger as canonical JSONL.
pub async fn run_pipeline_files(
    source: &Path,
    mcq_out: &Path,
    rejected_out: &Path,
    cfg: &PipelineConfig,
    client: &dyn ChatClient,
    counter: &dyn TokenCounter,
) -> Result<PipelineOutput, PipelineError> {
    let items = jsonl::read_qa(source)?;
    let output = run_pipeline(&items, cfg, client, counter).await?;
    jsonl::write_jsonl(mcq_out, &output.accepted)?;
    jsonl::write_jsonl(rejected_out, &output.rejected)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatRequest, ChatResponse};
    use crate::model::SourceTag;
    use crate::tokens::ApproxTokenCounter;
    use async_trait::async_trait;
    use std::sync::Mutex;

    /// Answers by stage, recognised from the system prompt.
    struct Scripted {
        log: Mutex<Vec<(String, String)>>,
        assess: &'static str,
    }

    fn stage_of(req: &ChatRequest) -> &'static str {
        if req.system.contains("country identification") {
            "country"
        } else if req.system.contains("annotation assistant") {
            "assess"
        } else {
            "distractor"
        }
    }

    #[async_trait]
    impl ChatClient for Scripted {
        async fn complete(&self, req: &ChatRequest, _sample: u32) -> Result<ChatResponse, GatewayError> {
            let stage = stage_of(req);
            let qid = req.user.split("ID").nth(1).unwrap_or("").chars().take(3).collect::<String>();
            self.log.lock().unwrap().push((stage.to_string(), qid));
            let content = match stage {
                "country" => r#"{"country":"Qatar"}"#.to_string(),
                "assess" => self.assess.to_string(),
                _ => r#"{"A.":"أ","B":"ب","C":"ج"}"#.to_string(),
            };
            Ok(ChatResponse {
                content,
                model: req.model.clone(),
                attempts: 1,
                from_cache: false,
                latency_ms: 0,
            })
        }
    }

    fn qa(n: usize) -> QaPair {
        QaPair {
            id: format!("q{n:02}"),
            question: format!("سؤال ID{n:03}؟"),
            answer: "د".into(),
            country: None,
            source_url: None,
            source_tag: SourceTag::User,
            flags: Default::default(),
        }
    }

    #[tokio::test]
    async fn empty_input() {
        let client = Scripted {
            log: Mutex::new(vec![]),
            assess: "",
        };
        let out = run_pipeline(&[], &PipelineConfig::default(), &client, &ApproxTokenCounter)
            .await
            .unwrap();
        assert_eq!(out, PipelineOutput::default());
    }

    #[tokio::test]
    async fn dropped_items_never_reach_later_stages() {
        let client = Scripted {
            log: Mutex::new(vec![]),
            assess: r#"{"answer_evaluation":"Incorrect","corrected_answer":"","culture_relevance":"Yes"}"#,
        };
        let items: Vec<_> = (0..5).map(qa).collect();
        let out = run_pipeline(&items, &PipelineConfig::default(), &client, &ApproxTokenCounter)
            .await
            .unwrap();
        assert!(out.accepted.is_empty());
        assert!(out.rejected.iter().all(|r| r.stage == Stage::Assess && r.reason == "factually_incorrect"));
        let log = client.log.lock().unwrap();
        assert!(log.iter().all(|(stage, _)| stage != "distractor"));
        assert_eq!(log.len(), 10);
    }

    #[tokio::test]
    async fn accepted_items_are_sorted_and_tagged() {
        let client = Scripted {
            log: Mutex::new(vec![]),
            assess: r#"{"answer_evaluation":"Correct","corrected_answer":"","culture_relevance":"Yes"}"#,
        };
        let items: Vec<_> = (0..6).rev().map(qa).collect();
        let cfg = PipelineConfig {
            parallelism: 3,
            ..Default::default()
        };
        let out = run_pipeline(&items, &cfg, &client, &ApproxTokenCounter).await.unwrap();
        let ids: Vec<_> = out.accepted.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["q00", "q01", "q02", "q03", "q04", "q05"]);
        for item in &out.accepted {
            item.check().unwrap();
            assert_eq!(item.country.as_deref(), Some("QA"));
            assert!(item.token_count.unwrap() as usize <= cfg.max_prompt_tokens);
        }
    }

    #[tokio::test]
    async fn duplicate_input_ids_abort() {
        let client = Scripted {
            log: Mutex::new(vec![]),
            assess: "",
        };
        let items = vec![qa(1), qa(1)];
        assert!(matches!(
            run_pipeline(&items, &PipelineConfig::default(), &client, &ApproxTokenCounter).await,
            Err(PipelineError::Duplicates(_))
        ));
    }
}
