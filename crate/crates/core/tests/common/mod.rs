#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use mcqforge_core::gateway::{Gateway, GatewayConfig, RetryPolicy};
use mcqforge_core::model::McqItem;
use mock_llm::{MockServer, ReplayRule};
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Gateway settings with millisecond backoff so retry tests stay fast.
pub fn quick_config(base_url: String) -> GatewayConfig {
    GatewayConfig {
        retry: RetryPolicy {
            base_delay: Duration::from_millis(5),
            ..RetryPolicy::default()
        },
        ..GatewayConfig::new(base_url)
    }
}

pub fn gateway(config: GatewayConfig) -> Gateway {
    Gateway::new(config).expect("valid gateway config")
}

/// Unique substrings of each stage's system prompt.
pub const COUNTRY_MARK: &str = "country identification";
pub const ASSESS_MARK: &str = "annotation assistant";
pub const DISTRACTOR_MARK: &str = "educational content creation";

/// Replay rules built from `pipeline_replies.json`.
pub fn pipeline_rules() -> Vec<ReplayRule> {
    let raw = std::fs::read_to_string(fixture("pipeline_replies.json")).unwrap();
    let entries: Vec<Value> = serde_json::from_str(&raw).unwrap();
    let mut rules = Vec::new();
    for e in entries {
        let q = e["question"].as_str().unwrap();
        let text = |v: &Value| v.as_str().unwrap().to_string();
        rules.push(ReplayRule::new(COUNTRY_MARK, q, vec![text(&e["country"])]));
        rules.push(ReplayRule::new(ASSESS_MARK, q, vec![text(&e["assess"])]));
        let ds: Vec<String> = e["distractors"].as_array().unwrap().iter().map(text).collect();
        if !ds.is_empty() {
            rules.push(ReplayRule::new(DISTRACTOR_MARK, q, ds));
        }
    }
    rules
}

pub async fn pipeline_server() -> MockServer {
    MockServer::start(mock_llm::replay(pipeline_rules())).await
}

/// Seeded items with distinct Arabic-looking options.
pub fn synthetic_items(n: usize, seed: u64) -> Vec<McqItem> {
    use mcqforge_core::augment::assemble_mcq;
    use mcqforge_core::model::{QaPair, SourceTag};
    (0..n)
        .map(|i| {
            let qa = QaPair {
                id: format!("syn-{i:05}"),
                question: format!("سؤال رقم {i}؟"),
                answer: format!("جواب {i}"),
                country: None,
                source_url: None,
                source_tag: SourceTag::User,
                flags: Default::default(),
            };
            let ds = [format!("خيار أول {i}"), format!("خيار ثان {i}"), format!("خيار ثالث {i}")];
            assemble_mcq(&qa, &ds, seed, "fixture").unwrap()
        })
        .collect()
}
