//! Per-run response cache with an optional append-only overflow file.
//!
//! Keyed on `(model, rendered messages, temperature)`. The overflow file holds
//! one JSON record per line: `{key_hash, request, response}`; records found
//! there at startup are served from memory.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatProvider, CompletionRequest, LlmError};

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key_hash: String,
    request: CompletionRequest,
    response: String,
}

pub struct CachedProvider<P> {
    inner: P,
    entries: Mutex<HashMap<String, String>>,
    overflow: Option<Mutex<File>>,
}

pub fn cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.model.as_bytes());
    hasher.update([0]);
    hasher.update(request.render().as_bytes());
    hasher.update([0]);
    hasher.update(request.temperature.to_bits().to_le_bytes());
    hex::encode(hasher.finalize())
}

impl<P> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            entries: Mutex::new(HashMap::new()),
            overflow: None,
        }
    }

    /// Loads any records already in `path` and appends new ones to it.
    pub fn with_overflow_file(inner: P, path: &Path) -> Result<Self, LlmError> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| LlmError::Config(format!("cache file {}: {e}", path.display())))?;
                entries.insert(record.key_hash, record.response);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            entries: Mutex::new(entries),
            overflow: Some(Mutex::new(file)),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().map(|e| e.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: ChatProvider> ChatProvider for CachedProvider<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let key = cache_key(request);
        if let Some(hit) = self.entries.lock().ok().and_then(|e| e.get(&key).cloned()) {
            return Ok(hit);
        }
        let response = self.inner.complete(request)?;
        if let Ok(mut entries) = self.entries.lock() {
            entries.insert(key.clone(), response.clone());
        }
        if let Some(file) = &self.overflow {
            let record = CacheRecord {
                key_hash: key,
                request: request.clone(),
                response: response.clone(),
            };
            let line = serde_json::to_string(&record).map_err(|e| LlmError::Protocol(e.to_string()))?;
            let mut f = file.lock().expect("cache file lock poisoned");
            writeln!(f, "{line}")?;
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatMessage;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[derive(Default)]
    struct Counting(AtomicUsize);

    impl ChatProvider for Counting {
        fn complete(&self, r: &CompletionRequest) -> Result<String, LlmError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(format!("echo {}", r.messages[0].content))
        }
    }

    fn req(text: &str, temperature: f32) -> CompletionRequest {
        let mut r = CompletionRequest::new("m", vec![ChatMessage::user(text)]);
        r.temperature = temperature;
        r
    }

    #[test]
    fn identical_requests_hit_cache() {
        let c = CachedProvider::new(Counting::default());
        assert_eq!(c.complete(&req("a", 0.0)).unwrap(), "echo a");
        assert_eq!(c.complete(&req("a", 0.0)).unwrap(), "echo a");
        assert_eq!(c.inner().0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn temperature_is_part_of_key() {
        let c = CachedProvider::new(Counting::default());
        c.complete(&req("a", 0.0)).unwrap();
        c.complete(&req("a", 0.7)).unwrap();
        assert_eq!(c.inner().0.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn distinct_requests_each_call_once() {
        let c = CachedProvider::new(Counting::default());
        for i in 0..100 {
            c.complete(&req(&format!("q{i}"), 0.0)).unwrap();
        }
        for i in 0..100 {
            c.complete(&req(&format!("q{i}"), 0.0)).unwrap();
        }
        assert_eq!(c.inner().0.load(Ordering::SeqCst), 100);
        assert_eq!(c.len(), 100);
    }

    #[test]
    fn overflow_file_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.ndjson");
        {
            let c = CachedProvider::with_overflow_file(Counting::default(), &path).unwrap();
            c.complete(&req("a", 0.0)).unwrap();
            c.complete(&req("b", 0.0)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(first["key_hash"].is_string());
        assert_eq!(first["request"]["model"], "m");
        assert_eq!(first["response"], "echo a");

        let c = CachedProvider::with_overflow_file(Counting::default(), &path).unwrap();
        assert_eq!(c.complete(&req("a", 0.0)).unwrap(), "echo a");
        assert_eq!(c.inner().0.load(Ordering::SeqCst), 0);
    }
}
