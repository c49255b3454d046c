use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use super::{Completion, CompletionRequest, Provider, ProviderError};
use crate::record::Record;

/// Canned responses: per-tag queues, plus a global sequence for tags
/// that have no queue of their own.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub tagged: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub sequence: Vec<String>,
}

impl Record for Script {
    const KIND: &'static str = "script";
}

impl Script {
    pub fn push_tagged(&mut self, tag: impl Into<String>, response: impl Into<String>) {
        self.tagged
            .entry(tag.into())
            .or_default()
            .push(response.into());
    }

    pub fn is_empty(&self) -> bool {
        self.tagged.is_empty() && self.sequence.is_empty()
    }
}

#[derive(Default)]
struct Cursors {
    tagged: HashMap<String, usize>,
    sequence: usize,
}

/// Deterministic replay of a [`Script`].
pub struct ScriptedProvider {
    script: Script,
    cursors: Mutex<Cursors>,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            cursors: Mutex::new(Cursors::default()),
        }
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError> {
        let mut cursors = self.cursors.lock().expect("script lock");
        if let Some(queue) = self.script.tagged.get(&req.tag) {
            let k = cursors.tagged.entry(req.tag.clone()).or_insert(0);
            let text = queue
                .get(*k)
                .ok_or_else(|| ProviderError::ScriptExhausted(req.tag.clone()))?;
            *k += 1;
            return Ok(Completion::text(text.clone()));
        }
        if self.script.sequence.is_empty() {
            return Err(ProviderError::Unscripted(req.tag.clone()));
        }
        let text = self
            .script
            .sequence
            .get(cursors.sequence)
            .ok_or_else(|| ProviderError::ScriptExhausted(req.tag.clone()))?;
        cursors.sequence += 1;
        Ok(Completion::text(text.clone()))
    }
}

type Responder = dyn Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync;

/// Provider backed by a closure.
pub struct FnProvider {
    name: String,
    f: Box<Responder>,
}

impl FnProvider {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }
}

impl Provider for FnProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError> {
        (self.f)(req).map(Completion::text)
    }
}

/// Wraps a provider and records every response under its tag.
pub struct RecordingProvider {
    inner: Arc<dyn Provider>,
    script: Mutex<Script>,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn Provider>) -> Self {
        Self {
            inner,
            script: Mutex::new(Script::default()),
        }
    }

    pub fn script(&self) -> Script {
        self.script.lock().expect("recording lock").clone()
    }
}

impl Provider for RecordingProvider {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError> {
        let out = self.inner.complete(req)?;
        self.script
            .lock()
            .expect("recording lock")
            .push_tagged(req.tag.clone(), out.text.clone());
        Ok(out)
    }
}
