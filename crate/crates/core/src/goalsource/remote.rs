use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable holding the completion endpoint URL.
pub const ENDPOINT_ENV: &str = "DLLM_LLM_ENDPOINT";
/// Optional bearer token.
pub const TOKEN_ENV: &str = "DLLM_LLM_TOKEN";

#[derive(Serialize)]
struct CompletionRequest<'a> {
    system: &'a str,
    user: &'a str,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    completion: String,
}

/// Blocking JSON-over-HTTP text completion client.
pub struct RemoteClient {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    calls: u64,
}

impl RemoteClient {
    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            token,
            agent,
            temperature: 0.5,
            top_p: 1.0,
            max_tokens: 500,
            calls: 0,
        }
    }

    /// Client configured from `DLLM_LLM_ENDPOINT` / `DLLM_LLM_TOKEN`, or
    /// `None` when no endpoint is set.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty())?;
        let token = std::env::var(TOKEN_ENV).ok().filter(|s| !s.is_empty());
        Some(Self::new(endpoint, token))
    }

    /// Number of HTTP requests issued so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn complete(&mut self, system: &str, user: &str) -> Result<String> {
        self.calls += 1;
        let body = CompletionRequest {
            system,
            user,
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
        };
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Error::RemoteUnavailable(e.to_string()))?;
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::RemoteUnavailable(format!("bad response body: {e}")))?;
        Ok(parsed.completion)
    }
}
