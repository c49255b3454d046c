//! Provider-agnostic text completion with retries, response caching and usage
//! accounting.
//!
//! Every call carries a tag (`op/p<particle>/t<iteration>[/detail]`) that the
//! scripted provider uses for lookup and the ledger uses for auditing.

mod cache;
mod http;
mod ledger;
mod scripted;

pub use cache::{cache_key, OfflineProvider, ResponseCache};
pub use http::{HttpProvider, HttpProviderConfig};
pub use ledger::{UsageEntry, UsageLedger, UsageTotals};
pub use scripted::{FnProvider, RecordingProvider, Script, ScriptedProvider};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Which model family a call is made for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Optimizer,
    Executor,
}

/// Structured call tag, rendered as `op/p<particle>/t<iteration>[/detail]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallTag {
    pub op: String,
    pub particle: Option<usize>,
    pub iteration: Option<usize>,
    pub detail: Option<String>,
}

impl CallTag {
    pub fn new(op: impl Into<String>) -> Self {
        Self {
            op: op.into(),
            particle: None,
            iteration: None,
            detail: None,
        }
    }

    pub fn at(op: impl Into<String>, particle: usize, iteration: usize) -> Self {
        Self {
            op: op.into(),
            particle: Some(particle),
            iteration: Some(iteration),
            detail: None,
        }
    }

    pub fn with_detail(&self, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        Self {
            detail: Some(match &self.detail {
                Some(d) => format!("{d}/{detail}"),
                None => detail,
            }),
            ..self.clone()
        }
    }
}

impl fmt::Display for CallTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.op)?;
        if let Some(p) = self.particle {
            write!(f, "/p{p}")?;
        }
        if let Some(t) = self.iteration {
            write!(f, "/t{t}")?;
        }
        if let Some(d) = &self.detail {
            write!(f, "/{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub model: String,
    pub tag: String,
    pub seed: u64,
    pub profile: Profile,
}

impl CompletionRequest {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.prompt.trim().is_empty() {
            out.push("prompt is empty".to_string());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            out.push(format!(
                "temperature {} is not a finite value ≥ 0",
                self.temperature
            ));
        }
        out
    }

    /// The op component of the tag.
    pub fn op(&self) -> &str {
        self.tag.split('/').next().unwrap_or("")
    }
}

/// Text returned by a provider, with token usage when the provider reports it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned status {code}: {message}")]
    Status { code: u16, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("unscripted tag `{0}`")]
    Unscripted(String),
    #[error("script exhausted for `{0}`")]
    ScriptExhausted(String),
    #[error("no cached response for `{0}`")]
    CacheMiss(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }

    fn is_rate_limit(&self) -> bool {
        matches!(self, ProviderError::Status { code: 429, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("{source} (after {attempts} attempt(s))")]
    Provider {
        source: ProviderError,
        attempts: u32,
    },
    #[error("rate limited; retry budget of {attempts} attempt(s) exhausted")]
    RateLimited { attempts: u32 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A completion backend.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

/// Thread-safe front door to a provider.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    cache: Option<ResponseCache>,
    ledger: Mutex<UsageLedger>,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        Self {
            provider,
            cache: None,
            ledger: Mutex::new(UsageLedger::default()),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        let problems = req.problems();
        if !problems.is_empty() {
            return Err(GatewayError::InvalidRequest(problems.join("; ")));
        }
        let start = Instant::now();
        let key = cache_key(&req.model, req.temperature, req.seed, &req.prompt);
        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.record(
                req,
                &Completion::text(text.clone()),
                start.elapsed(),
                true,
                0,
            );
            return Ok(text);
        }

        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.provider.complete(req) {
                Ok(completion) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &completion.text);
                    }
                    self.record(req, &completion, start.elapsed(), false, attempt);
                    return Ok(completion.text);
                }
                Err(err) if err.is_retryable() && attempt < self.retry.max_attempts => {
                    tracing::warn!(tag = %req.tag, attempt, error = %err, "retrying completion");
                    std::thread::sleep(self.retry.delay(attempt));
                }
                Err(err) if err.is_rate_limit() => {
                    return Err(GatewayError::RateLimited { attempts: attempt });
                }
                Err(source) => {
                    return Err(GatewayError::Provider {
                        source,
                        attempts: attempt,
                    })
                }
            }
        }
    }

    fn record(
        &self,
        req: &CompletionRequest,
        completion: &Completion,
        elapsed: Duration,
        cached: bool,
        attempts: u32,
    ) {
        let entry = UsageEntry {
            tag: req.tag.clone(),
            profile: req.profile,
            provider: if cached {
                "cache".to_string()
            } else {
                self.provider.name().to_string()
            },
            model: req.model.clone(),
            prompt_units: completion
                .prompt_tokens
                .unwrap_or_else(|| approx_units(&req.prompt)),
            completion_units: completion
                .completion_tokens
                .unwrap_or_else(|| approx_units(&completion.text)),
            elapsed_ms: elapsed.as_millis() as u64,
            cached,
            attempts,
        };
        self.ledger.lock().expect("ledger lock").push(entry);
    }

    pub fn ledger(&self) -> UsageLedger {
        self.ledger.lock().expect("ledger lock").clone()
    }
}

/// Whitespace-delimited word count, used when the provider reports no usage.
pub fn approx_units(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn req(tag: &str, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.7,
            model: "m".into(),
            tag: tag.into(),
            seed: 1,
            profile: Profile::Optimizer,
        }
    }

    struct Flaky {
        failures: u32,
        code: u16,
        calls: AtomicU32,
    }

    impl Provider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _req: &CompletionRequest) -> Result<Completion, ProviderError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(ProviderError::Status {
                    code: self.code,
                    message: "boom".into(),
                })
            } else {
                Ok(Completion::text("ok"))
            }
        }
    }

    #[test]
    fn tag_rendering() {
        assert_eq!(
            CallTag::at("init_team", 0, 0).to_string(),
            "init_team/p0/t0"
        );
        assert_eq!(
            CallTag::at("eval", 2, 3).with_detail("repair1").to_string(),
            "eval/p2/t3/repair1"
        );
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let p = Arc::new(Flaky {
            failures: 2,
            code: 503,
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::new(p.clone()).with_retry(RetryPolicy::immediate());
        assert_eq!(gw.complete(&req("a", "hi")).unwrap(), "ok");
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        assert_eq!(gw.ledger().entries[0].attempts, 3);
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let p = Arc::new(Flaky {
            failures: 10,
            code: 500,
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::new(p.clone()).with_retry(RetryPolicy::immediate());
        let err = gw.complete(&req("a", "hi")).unwrap_err();
        assert!(matches!(err, GatewayError::Provider { attempts: 3, .. }));
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        assert!(gw.ledger().entries.is_empty());
    }

    #[test]
    fn rate_limit_exhaustion() {
        let p = Arc::new(Flaky {
            failures: 10,
            code: 429,
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::new(p).with_retry(RetryPolicy::immediate());
        assert_eq!(
            gw.complete(&req("a", "hi")).unwrap_err(),
            GatewayError::RateLimited { attempts: 3 }
        );
    }

    #[test]
    fn client_errors_are_not_retried() {
        let p = Arc::new(Flaky {
            failures: 10,
            code: 400,
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::new(p.clone()).with_retry(RetryPolicy::immediate());
        assert!(gw.complete(&req("a", "hi")).is_err());
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_serves_identical_requests() {
        let p = Arc::new(Flaky {
            failures: 0,
            code: 500,
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::new(p.clone()).with_cache(ResponseCache::in_memory());
        gw.complete(&req("a", "same prompt")).unwrap();
        gw.complete(&req("b", "same prompt")).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
        let ledger = gw.ledger();
        assert!(!ledger.entries[0].cached);
        assert!(ledger.entries[1].cached);
        assert_eq!(ledger.totals.cached_calls, 1);
    }

    #[test]
    fn rejects_invalid_requests() {
        let gw = Gateway::new(Arc::new(FnProvider::new("x", |_| Ok("y".into()))));
        let mut r = req("a", "   ");
        assert!(matches!(
            gw.complete(&r),
            Err(GatewayError::InvalidRequest(_))
        ));
        r.prompt = "p".into();
        r.temperature = f64::NAN;
        assert!(matches!(
            gw.complete(&r),
            Err(GatewayError::InvalidRequest(_))
        ));
    }
}
