//! Layered settings: built-in defaults, then a flat `key = value` file, then
//! command-line overrides, then `MCQFORGE_*` environment variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use mcqforge_core::augment::{PipelineConfig, UnsurePolicy};
use mcqforge_core::gateway::{GatewayConfig, RetryPolicy, API_KEY_ENV};

/// Raised for anything the user must fix in configuration or flags.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every recognised key with its default value ("" means unset).
pub const KEYS: [(&str, &str); 15] = [
    ("llm.base_url", "https://api.openai.com/v1"),
    ("llm.model", "gpt-4.1"),
    ("llm.cache_dir", ""),
    ("llm.parallelism", "4"),
    ("llm.timeout_secs", "60"),
    ("llm.max_retries", "4"),
    ("llm.backoff_base_ms", "1000"),
    ("llm.max_tokens", "512"),
    ("pipeline.max_prompt_tokens", "512"),
    ("pipeline.unsure_policy", "keep_flagged"),
    ("pipeline.distractor_retries", "2"),
    ("pipeline.shuffle_seed", "0"),
    ("pipeline.domain_allowlist", ""),
    ("eval.max_tokens", "16"),
    ("review.seed", "0"),
];

/// Environment variable consulted for `key`, e.g. `MCQFORGE_LLM_BASE_URL`.
pub fn env_name(key: &str) -> String {
    format!("MCQFORGE_{}", key.replace('.', "_").to_ascii_uppercase())
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
    api_key: Option<String>,
}

fn check_key(key: &str, origin: &str) -> Result<(), ConfigError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(ConfigError(format!("{origin}: unknown key {key:?}")))
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let origin = format!("{}:{}", path.display(), n + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("{origin}: expected `key = value`")))?;
        let key = key.trim();
        check_key(key, &origin)?;
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Splits a `--set key=value` argument.
pub fn parse_override(raw: &str) -> Result<(String, String), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set expects key=value, got {raw:?}")))?;
    let key = key.trim();
    check_key(key, "--set")?;
    Ok((key.to_string(), value.trim().to_string()))
}

impl Settings {
    pub fn load(
        file: Option<&Path>,
        overrides: &[(String, String)],
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            values.extend(parse_file(path)?);
        }
        for (k, v) in overrides {
            check_key(k, "flag")?;
            values.insert(k.clone(), v.clone());
        }
        for (k, _) in KEYS {
            if let Some(v) = env(&env_name(k)) {
                values.insert(k.to_string(), v);
            }
        }
        let api_key = env(API_KEY_ENV).filter(|k| !k.is_empty());
        let settings = Self { values, api_key };
        settings.gateway_config()?;
        settings.pipeline_config()?;
        settings.parse::<u32>("eval.max_tokens")?;
        settings.parse::<u64>("review.seed")?;
        Ok(settings)
    }

    pub fn from_process(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        Self::load(file, overrides, &|name| std::env::var(name).ok())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| ConfigError(format!("{key} = {raw:?}: {e}")))
    }

    pub fn gateway_config(&self) -> Result<GatewayConfig, ConfigError> {
        let cache = self.get("llm.cache_dir");
        let parallelism: usize = self.parse("llm.parallelism")?;
        if parallelism == 0 {
            return Err(ConfigError("llm.parallelism must be at least 1".into()));
        }
        Ok(GatewayConfig {
            base_url: self.get("llm.base_url").to_string(),
            api_key: self.api_key.clone(),
            parallelism,
            timeout: Duration::from_secs(self.parse("llm.timeout_secs")?),
            retry: RetryPolicy {
                max_retries: self.parse("llm.max_retries")?,
                base_delay: Duration::from_millis(self.parse("llm.backoff_base_ms")?),
                ..RetryPolicy::default()
            },
            cache_dir: (!cache.is_empty()).then(|| PathBuf::from(cache)),
        })
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, ConfigError> {
        let unsure_policy = match self.get("pipeline.unsure_policy") {
            "keep_flagged" => UnsurePolicy::KeepFlagged,
            "drop" => UnsurePolicy::Drop,
            other => {
                return Err(ConfigError(format!(
                    "pipeline.unsure_policy must be keep_flagged or drop, got {other:?}"
                )))
            }
        };
        let allow = self.get("pipeline.domain_allowlist");
        let domain_allowlist = (!allow.trim().is_empty()).then(|| {
            allow
                .split(',')
                .map(|h| h.trim().to_ascii_lowercase())
                .filter(|h| !h.is_empty())
                .collect::<BTreeSet<_>>()
        });
        let cfg = PipelineConfig {
            max_prompt_tokens: self.parse("pipeline.max_prompt_tokens")?,
            unsure_policy,
            distractor_retries: self.parse("pipeline.distractor_retries")?,
            shuffle_seed: self.parse("pipeline.shuffle_seed")?,
            domain_allowlist,
            model: self.get("llm.model").to_string(),
            max_response_tokens: self.parse("llm.max_tokens")?,
            parallelism: self.parse("llm.parallelism")?,
            ..PipelineConfig::default()
        };
        cfg.validate().map_err(ConfigError)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(vars: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = vars.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |name| map.get(name).cloned()
    }

    #[test]
    fn defaults() {
        let s = Settings::load(None, &[], &env(&[])).unwrap();
        let p = s.pipeline_config().unwrap();
        assert_eq!(p.max_prompt_tokens, 512);
        assert_eq!(p.distractor_retries, 2);
        assert_eq!(p.unsure_policy, UnsurePolicy::KeepFlagged);
        let g = s.gateway_config().unwrap();
        assert_eq!(g.retry, RetryPolicy::default());
        assert!(g.cache_dir.is_none() && g.api_key.is_none());
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("mcq.conf");
        std::fs::write(
            &file,
            "# comment\nllm.parallelism = 2\npipeline.max_prompt_tokens=300\nllm.model = from-file\n",
        )
        .unwrap();
        let overrides = vec![
            ("pipeline.max_prompt_tokens".to_string(), "400".to_string()),
            ("llm.model".to_string(), "from-flag".to_string()),
        ];
        let s = Settings::load(
            Some(&file),
            &overrides,
            &env(&[("MCQFORGE_LLM_MODEL", "from-env"), ("MCQFORGE_API_KEY", "k")]),
        )
        .unwrap();
        assert_eq!(s.get("llm.parallelism"), "2");
        assert_eq!(s.get("pipeline.max_prompt_tokens"), "400");
        assert_eq!(s.get("llm.model"), "from-env");
        assert_eq!(s.gateway_config().unwrap().api_key.as_deref(), Some("k"));
    }

    #[test]
    fn bad_values_are_config_errors() {
        for (k, v) in [
            ("pipeline.max_prompt_tokens", "10"),
            ("llm.parallelism", "0"),
            ("llm.parallelism", "many"),
            ("pipeline.unsure_policy", "maybe"),
        ] {
            let o = vec![(k.to_string(), v.to_string())];
            assert!(Settings::load(None, &o, &env(&[])).is_err(), "{k}={v}");
        }
    }

    #[test]
    fn unknown_keys() {
        assert!(parse_override("llm.colour=red").is_err());
        assert!(parse_override("no-equals").is_err());
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.conf");
        std::fs::write(&file, "llm.base_url = x\nbogus = 1\n").unwrap();
        let err = parse_file(&file).unwrap_err();
        assert!(err.0.contains(":2"), "{err}");
    }

    #[test]
    fn allowlist_is_comma_separated() {
        let o = vec![("pipeline.domain_allowlist".to_string(), "A.com, b.org ,".to_string())];
        let s = Settings::load(None, &o, &env(&[])).unwrap();
        let allow = s.pipeline_config().unwrap().domain_allowlist.unwrap();
        assert_eq!(allow.into_iter().collect::<Vec<_>>(), ["a.com", "b.org"]);
    }

    #[test]
    fn env_names() {
        assert_eq!(env_name("llm.base_url"), "MCQFORGE_LLM_BASE_URL");
        assert_eq!(env_name("pipeline.max_prompt_tokens"), "MCQFORGE_PIPELINE_MAX_PROMPT_TOKENS");
    }
}
