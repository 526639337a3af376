//! HTTP backends for the caricheck harness: a chat-completion text
//! generator and an embedding-service client. Both speak the common
//! OpenAI-style JSON shapes and authenticate with a bearer token read
//! from an environment variable named in the endpoint config, so no
//! credential ever lives in a config file.

use std::thread;
use std::time::Duration;

use caricheck_core::{Embedder, Error, Result, SamplingParams, TextGenerator};
use serde::Deserialize;

/// Where a service lives and how to authenticate against it.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub url: String,
    /// Name of the environment variable holding the bearer token.
    /// None means the endpoint is unauthenticated.
    pub auth_env: Option<String>,
    pub timeout_secs: u64,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> EndpointConfig {
        EndpointConfig { url: url.into(), auth_env: None, timeout_secs: 60 }
    }

    pub fn with_auth_env(mut self, name: impl Into<String>) -> EndpointConfig {
        self.auth_env = Some(name.into());
        self
    }

    /// Resolve the token now so a missing credential fails at startup,
    /// not mid-run after paid generation calls.
    fn token(&self) -> Result<Option<String>> {
        let Some(name) = &self.auth_env else { return Ok(None) };
        match std::env::var(name) {
            Ok(value) if !value.trim().is_empty() => Ok(Some(value)),
            _ => Err(Error::InvalidArgument(format!(
                "auth environment variable {name} is unset or empty"
            ))),
        }
    }

    fn client(&self) -> Result<reqwest::blocking::Client> {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.timeout_secs.max(1)))
            .build()
            .map_err(|e| Error::Transport(format!("http client: {e}")))
    }
}

fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    token: Option<&str>,
    body: &serde_json::Value,
) -> Result<String> {
    let mut request = client.post(url).json(body);
    if let Some(token) = token {
        request = request.bearer_auth(token);
    }
    let response = request
        .send()
        .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
    let status = response.status();
    let text = response
        .text()
        .map_err(|e| Error::Transport(format!("reading body from {url}: {e}")))?;
    if !status.is_success() {
        let snippet: String = text.chars().take(200).collect();
        return Err(Error::Transport(format!("{status} from {url}: {snippet}")));
    }
    Ok(text)
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    #[serde(default)]
    message: Option<ChatMessage>,
    /// Completion-style services put the text here instead.
    #[serde(default)]
    text: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Chat-completion client. One attempt per call: the generation harness
/// already wraps `complete` in its own retry/backoff loop.
pub struct HttpTextGenerator {
    client: reqwest::blocking::Client,
    url: String,
    token: Option<String>,
}

impl HttpTextGenerator {
    pub fn new(config: &EndpointConfig) -> Result<HttpTextGenerator> {
        Ok(HttpTextGenerator {
            client: config.client()?,
            url: config.url.clone(),
            token: config.token()?,
        })
    }
}

impl TextGenerator for HttpTextGenerator {
    fn complete(&self, prompt: &str, model_id: &str, sampling: &SamplingParams) -> Result<String> {
        let body = serde_json::json!({
            "model": model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_tokens,
            "n": 1,
        });
        let raw = post_json(&self.client, &self.url, self.token.as_deref(), &body)?;
        let parsed: ChatResponse = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            context: format!("generation response from {}", self.url),
            message: e.to_string(),
        })?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| Error::Parse {
            context: format!("generation response from {}", self.url),
            message: "no choices in response".into(),
        })?;
        match (choice.message, choice.text) {
            (Some(message), _) => Ok(message.content),
            (None, Some(text)) => Ok(text),
            (None, None) => Err(Error::Parse {
                context: format!("generation response from {}", self.url),
                message: "choice carries neither message.content nor text".into(),
            }),
        }
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

/// Embedding-service client. Unlike generation, the embedding call path
/// has no harness-level retry, so transient transport failures are
/// retried here with doubling backoff.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    token: Option<String>,
    model: String,
    id: String,
    retries: u32,
    backoff_ms: u64,
}

impl HttpEmbedder {
    pub fn new(config: &EndpointConfig, model: &str) -> Result<HttpEmbedder> {
        Ok(HttpEmbedder {
            client: config.client()?,
            url: config.url.clone(),
            token: config.token()?,
            model: model.to_string(),
            id: format!("http:{model}"),
            retries: 3,
            backoff_ms: 1000,
        })
    }

    /// `retries` counts attempts including the first; backoff doubles
    /// per further attempt.
    pub fn with_retry(mut self, retries: u32, backoff_ms: u64) -> HttpEmbedder {
        self.retries = retries.max(1);
        self.backoff_ms = backoff_ms;
        self
    }

    fn post_with_retry(&self, body: &serde_json::Value) -> Result<String> {
        let mut last = None;
        for attempt in 0..self.retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(self.backoff_ms << (attempt - 1)));
            }
            match post_json(&self.client, &self.url, self.token.as_deref(), body) {
                Ok(raw) => return Ok(raw),
                Err(err @ Error::Transport(_)) => last = Some(err),
                Err(err) => return Err(err),
            }
        }
        Err(last.unwrap_or_else(|| Error::Internal("retry loop ran zero attempts".into())))
    }
}

impl Embedder for HttpEmbedder {
    fn embedder_id(&self) -> &str {
        &self.id
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let raw = self.post_with_retry(&body)?;
        let parsed: EmbedResponse = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            context: format!("embedding response from {}", self.url),
            message: e.to_string(),
        })?;
        if parsed.data.len() != texts.len() {
            return Err(Error::Embedder(format!(
                "requested {} embeddings, service returned {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        // Services may return entries out of order; the index field, when
        // present on every entry, restores request order.
        let mut vectors: Vec<Option<Vec<f32>>> = vec![None; texts.len()];
        let indexed = parsed.data.iter().all(|d| d.index.is_some());
        for (position, datum) in parsed.data.into_iter().enumerate() {
            let slot = if indexed { datum.index.unwrap() } else { position };
            if slot >= vectors.len() || vectors[slot].is_some() {
                return Err(Error::Embedder(format!(
                    "embedding response index {slot} is out of range or duplicated"
                )));
            }
            vectors[slot] = Some(datum.embedding);
        }
        Ok(vectors.into_iter().map(|v| v.expect("all slots filled")).collect())
    }
}
