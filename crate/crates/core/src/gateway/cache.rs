//! Content-addressed reply cache.
//!
//! An entry lives at `<dir>/<first two hex chars>/<sha256>.json`. Entries are
//! written through a temp file and renamed into place, so concurrent writers of
//! one key leave a complete file behind. A file that fails to parse or names
//! a different key counts as a miss.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::ChatRequest;
use crate::jsonl;

#[derive(Debug, Clone)]
pub struct CacheHandle {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    model: String,
    content: String,
}

impl CacheHandle {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Digest of every request field that affects the reply. `sample`
    /// distinguishes deliberate re-draws of an identical request; sample 0
    /// hashes the request fields alone.
    pub fn key(request: &ChatRequest, sample: u32) -> String {
        let mut fields = json!({
            "model": request.model,
            "system": request.system,
            "user": request.user,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "response_format": request.response_format,
        });
        if sample > 0 {
            fields["sample"] = json!(sample);
        }
        hex::encode(Sha256::digest(jsonl::canonical_line(&fields).as_bytes()))
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Option<String> {
        let path = self.path_for(key);
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(entry) if entry.key == key => Some(entry.content),
            _ => {
                tracing::warn!(path = %path.display(), "ignoring corrupt cache entry");
                None
            }
        }
    }

    pub fn store(&self, key: &str, request: &ChatRequest, content: &str) -> io::Result<()> {
        let entry = Entry {
            key: key.to_string(),
            model: request.model.clone(),
            content: content.to_string(),
        };
        let bytes = serde_json::to_vec(&entry).map_err(io::Error::other)?;
        jsonl::write_atomic(&self.path_for(key), &bytes)
    }
}
