//! LLM-assisted conversion of free-form QA pairs into MCQ items.
//!
//! Stages run per item in a fixed order: country identification, source
//! domain filtering, answer assessment and refinement, distractor
//! generation, option assembly, and the prompt-length guard. See
//! [`pipeline::run_pipeline`] for the driver.

mod assemble;
mod assess;
mod country;
mod distractors;
mod domain;
pub mod pipeline;
mod review;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::country::UnknownCountry;
use crate::gateway::{ChatRequest, GatewayError, JsonExtractError, ResponseFormat};

pub use assemble::{assemble_mcq, guard_token_limit, GuardVerdict};
pub use assess::{apply_assessment, assess_qa, AssessmentDecision, DropReason};
pub use country::identify_country;
pub use distractors::{generate_distractors, parse_distractors};
pub use domain::{filter_by_domain, host_allowed};
pub use pipeline::{run_pipeline, run_pipeline_files, PipelineError, PipelineOutput, Rejection, Stage};
pub use review::{sample_for_review, select_for_review, write_review_sheet, ReviewError, REVIEW_HEADER};

pub(crate) mod templates {
    pub const COUNTRY_SYSTEM: &str = include_str!("../../templates/country_system.txt");
    pub const COUNTRY_USER: &str = include_str!("../../templates/country_user.txt");
    pub const ASSESS_SYSTEM: &str = include_str!("../../templates/assess_system.txt");
    pub const ASSESS_USER: &str = include_str!("../../templates/assess_user.txt");
    pub const DISTRACTOR_SYSTEM: &str = include_str!("../../templates/distractor_system.txt");
    pub const DISTRACTOR_USER: &str = include_str!("../../templates/distractor_user.txt");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsurePolicy {
    KeepFlagged,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTemperatures {
    pub country: f64,
    pub assess: f64,
    pub distractor: f64,
}

impl Default for StageTemperatures {
    fn default() -> Self {
        Self {
            country: 0.0,
            assess: 0.0,
            distractor: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_prompt_tokens: usize,
    pub unsure_policy: UnsurePolicy,
    pub distractor_retries: u32,
    pub shuffle_seed: u64,
    /// When set, only items whose source host is (a subdomain of) one of
    /// these hostnames survive.
    pub domain_allowlist: Option<BTreeSet<String>>,
    pub model: String,
    pub temperatures: StageTemperatures,
    pub max_response_tokens: u32,
    /// Items processed concurrently.
    pub parallelism: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_prompt_tokens: 512,
            unsure_policy: UnsurePolicy::KeepFlagged,
            distractor_retries: 2,
            shuffle_seed: 0,
            domain_allowlist: None,
            model: "gpt-4.1".into(),
            temperatures: StageTemperatures::default(),
            max_response_tokens: 512,
            parallelism: 4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_prompt_tokens < 32 {
            return Err(format!(
                "max_prompt_tokens must be at least 32, got {}",
                self.max_prompt_tokens
            ));
        }
        if matches!(&self.domain_allowlist, Some(set) if set.is_empty()) {
            return Err("domain allowlist is configured but empty".into());
        }
        if self.model.trim().is_empty() {
            return Err("model name is empty".into());
        }
        let t = &self.temperatures;
        for (stage, temp) in [("country", t.country), ("assess", t.assess), ("distractor", t.distractor)] {
            if !(0.0..=2.0).contains(&temp) {
                return Err(format!("{stage} temperature {temp} outside [0, 2]"));
            }
        }
        if self.max_response_tokens == 0 {
            return Err("max_response_tokens must be positive".into());
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        Ok(())
    }

    fn request(&self, system: &str, user: String, temperature: f64) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            system: system.to_string(),
            user,
            temperature,
            max_tokens: self.max_response_tokens,
            response_format: ResponseFormat::JsonObject,
        }
    }
}

/// Failure of a single stage for a single item.
#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Json(#[from] JsonExtractError),
    #[error("reply violates the expected schema: {0}")]
    Schema(String),
    #[error(transparent)]
    UnknownCountry(#[from] UnknownCountry),
    #[error("no acceptable distractors after {attempts} attempts: {reason}")]
    DistractorQuality { attempts: u32, reason: String },
    #[error("options {first} and {second} are identical")]
    DuplicateOption { first: usize, second: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl StageError {
    pub fn is_fatal(&self) -> bool {
        matches!(self, Self::Gateway(e) if e.is_fatal())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.max_prompt_tokens, 512);
        assert_eq!(cfg.distractor_retries, 2);
        assert_eq!(cfg.unsure_policy, UnsurePolicy::KeepFlagged);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_bounds() {
        let small = PipelineConfig {
            max_prompt_tokens: 31,
            ..Default::default()
        };
        assert!(small.validate().is_err());
        let empty = PipelineConfig {
            domain_allowlist: Some(BTreeSet::new()),
            ..Default::default()
        };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn prompt_templates_carry_placeholders() {
        assert!(templates::COUNTRY_USER.contains("\"{question}\""));
        assert!(templates::ASSESS_USER.contains("Question: {question}\nAnswer: {answer}"));
        assert!(templates::DISTRACTOR_USER.contains("Correct Answer: \"{answer}\""));
        assert!(templates::DISTRACTOR_SYSTEM.contains("\"A.\": \"\",\n\"B\": \"\",\n\"C\": \"\""));
    }
}
