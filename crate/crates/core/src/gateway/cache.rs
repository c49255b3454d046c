use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;

use super::{Completion, CompletionRequest, Provider, ProviderError};

/// Hash of (model, temperature, seed, prompt bytes).
pub fn cache_key(model: &str, temperature: f64, seed: u64, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update((model.len() as u64).to_le_bytes());
    h.update(model.as_bytes());
    h.update(temperature.to_bits().to_le_bytes());
    h.update(seed.to_le_bytes());
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

/// Response cache, in memory and optionally mirrored to a directory
/// (one `<key>.txt` file per response).
pub struct ResponseCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            mem: Mutex::new(HashMap::new()),
        }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            mem: Mutex::new(HashMap::new()),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(hit) = self.mem.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.txt"));
        let text = fs::read_to_string(path).ok()?;
        self.mem
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), text.clone());
        Some(text)
    }

    pub fn put(&self, key: &str, text: &str) {
        self.mem
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), text.to_string());
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{key}.txt"));
            if let Err(err) = fs::write(&path, text) {
                tracing::warn!(path = %path.display(), error = %err, "could not write cache entry");
            }
        }
    }
}

/// Provider for cache-only replay: every request that reaches it is a miss.
pub struct OfflineProvider;

impl Provider for OfflineProvider {
    fn name(&self) -> &str {
        "offline"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError> {
        Err(ProviderError::CacheMiss(req.tag.clone()))
    }
}
