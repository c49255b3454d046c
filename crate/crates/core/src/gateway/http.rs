use serde_json::{json, Value};
use std::time::Duration;

use super::{Completion, CompletionRequest, Provider, ProviderError};

/// Settings for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    /// Provider name; the API key is read from `TEXTSWARM_API_KEY_<NAME>`.
    pub name: String,
    pub base_url: String,
    pub timeout: Duration,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        Self {
            name: "openai".to_string(),
            base_url: "https://api.openai.com/v1".to_string(),
            timeout: Duration::from_secs(120),
        }
    }
}

impl HttpProviderConfig {
    pub fn key_var(&self) -> String {
        let upper: String = self
            .name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_uppercase()
                } else {
                    '_'
                }
            })
            .collect();
        format!("TEXTSWARM_API_KEY_{upper}")
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    key: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn from_env(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let var = config.key_var();
        let key =
            std::env::var(&var).map_err(|_| ProviderError::Config(format!("{var} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            config,
            key,
            client,
        })
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "seed": req.seed,
        });
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => parse_chat_response(&text),
            401 | 403 => Err(ProviderError::Auth(truncate(&text))),
            code => Err(ProviderError::Status {
                code,
                message: truncate(&text),
            }),
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

pub(crate) fn parse_chat_response(body: &str) -> Result<Completion, ProviderError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| ProviderError::Transport(format!("bad response body: {e}")))?;
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| ProviderError::Transport("response has no message content".into()))?;
    Ok(Completion {
        text: text.to_string(),
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64(),
        completion_tokens: v["usage"]["completion_tokens"].as_u64(),
    })
}
