//! Pulling a JSON object out of a model reply.

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no JSON object found in model reply: {snippet:?}")]
pub struct JsonExtractError {
    pub snippet: String,
}

fn parse_object(s: &str) -> Option<Map<String, Value>> {
    match serde_json::from_str::<Value>(s.trim()) {
        Ok(Value::Object(map)) => Some(map),
        _ => None,
    }
}

/// Bodies of Markdown code fences, in order of appearance. The info string
/// after the opening fence (e.g. `json`) is dropped.
fn fenced_blocks(content: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = content;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        // An info string never contains a brace; `{` right after the fence
        // means the body starts on the same line.
        let body_start = match after.find('{') {
            Some(b) if b < body_start => b,
            _ => body_start,
        };
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                blocks.push(body);
                break;
            }
        }
    }
    blocks
}

/// Parses a reply as a JSON object, trying in order: the whole reply, the
/// contents of Markdown code fences, then the span from the first `{` to the
/// last `}`.
pub fn extract_json(content: &str) -> Result<Map<String, Value>, JsonExtractError> {
    if let Some(map) = parse_object(content) {
        return Ok(map);
    }
    if let Some(map) = fenced_blocks(content).into_iter().find_map(parse_object) {
        return Ok(map);
    }
    if let (Some(start), Some(end)) = (content.find('{'), content.rfind('}')) {
        if start < end {
            if let Some(map) = parse_object(&content[start..=end]) {
                return Ok(map);
            }
        }
    }
    Err(JsonExtractError {
        snippet: content.chars().take(120).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn direct() {
        let m = extract_json(r#"{"country":"Qatar"}"#).unwrap();
        assert_eq!(m["country"], "Qatar");
    }

    #[test]
    fn fenced_with_info_string() {
        let m = extract_json("```json\n{\"country\":\"Qatar\"}\n```").unwrap();
        assert_eq!(m["country"], "Qatar");
    }

    #[test]
    fn fenced_inline() {
        let m = extract_json("Here you go: ```{\"country\": \"Oman\"}``` done").unwrap();
        assert_eq!(m["country"], "Oman");
    }

    #[test]
    fn unclosed_fence() {
        let m = extract_json("```json\n{\"a\": 1}\n").unwrap();
        assert_eq!(m["a"], 1);
    }

    #[test]
    fn brace_span() {
        let m = extract_json("Sure! {\"country\": \"Egypt\"} Hope this helps.").unwrap();
        assert_eq!(m["country"], "Egypt");
    }

    #[test]
    fn prose_only_fails() {
        assert!(extract_json("Sure! The answer is Qatar.").is_err());
    }

    #[test]
    fn arrays_are_not_objects() {
        assert!(extract_json("[1,2,3]").is_err());
    }

    #[test]
    fn second_fence_used_when_first_is_not_json() {
        let reply = "```text\nnot json\n```\n```json\n{\"k\":\"v\"}\n```";
        assert_eq!(extract_json(reply).unwrap()["k"], "v");
    }

    fn json_object() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            any::<bool>().prop_map(Value::from),
            any::<i32>().prop_map(Value::from),
            "[\\PC]{0,12}".prop_map(Value::from),
        ];
        let inner = leaf.prop_recursive(2, 12, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
                prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        });
        prop::collection::btree_map("[a-zA-Z_]{1,8}", inner, 0..5)
            .prop_map(|m| Value::Object(m.into_iter().collect()))
    }

    // Surrounding prose without braces or backticks.
    fn prose() -> impl Strategy<Value = String> {
        "[^{}`]{0,40}"
    }

    proptest! {
        #[test]
        fn single_embedded_object_is_found(obj in json_object(), pre in prose(), post in prose(), pretty in any::<bool>()) {
            let body = if pretty { serde_json::to_string_pretty(&obj).unwrap() } else { obj.to_string() };
            let reply = format!("{pre}{body}{post}");
            let got = extract_json(&reply).unwrap();
            prop_assert_eq!(Value::Object(got), obj);
        }

        #[test]
        fn fenced_object_is_found(obj in json_object(), pre in prose(), post in prose()) {
            let reply = format!("{pre}\n```json\n{}\n```\n{post}", serde_json::to_string_pretty(&obj).unwrap());
            let got = extract_json(&reply).unwrap();
            prop_assert_eq!(Value::Object(got), obj);
        }
    }

    #[test]
    fn nested_object_kept_whole() {
        let m = extract_json("x {\"a\": {\"b\": [1, {\"c\": 2}]}} y").unwrap();
        assert_eq!(Value::Object(m), json!({"a": {"b": [1, {"c": 2}]}}));
    }
}
